//! Named parameter sets with per-tensor Adam state.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
struct ParamEntry {
    value: Tensor,
    first_moment: Tensor,
    second_moment: Tensor,
}

/// Named tensors (weights, biases) plus optimizer accumulators and a
/// global step counter. Names are unique and shapes immutable after
/// insertion; iteration order is the sorted name order, which keeps
/// checkpoints and training byte-reproducible.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    entries: BTreeMap<String, ParamEntry>,
    step: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter name '{name}'"
            )));
        }
        let shape = value.shape().to_vec();
        self.entries.insert(
            name,
            ParamEntry {
                value,
                first_moment: Tensor::zeros(&shape),
                second_moment: Tensor::zeros(&shape),
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name).map(|e| &e.value)
    }

    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter '{name}'")))?;
        if entry.value.shape() != value.shape() {
            return Err(Error::shape(
                format!("parameter '{name}'"),
                entry.value.shape(),
                value.shape(),
            ));
        }
        entry.value = value;
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, e)| (n.as_str(), &e.value))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Total scalar parameter count.
    pub fn numel(&self) -> usize {
        self.entries.values().map(|e| e.value.numel()).sum()
    }

    /// One Adam update with bias correction. `grads` must contain an entry
    /// for every parameter (zeros for parameters the loss did not reach).
    pub fn adam_step(&mut self, grads: &BTreeMap<String, Tensor>, cfg: &AdamConfig) -> Result<()> {
        for name in self.entries.keys() {
            if !grads.contains_key(name) {
                return Err(Error::InvalidArgument(format!(
                    "adam_step: missing gradient for parameter '{name}'"
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (name, entry) in self.entries.iter_mut() {
            let g = &grads[name];
            if g.shape() != entry.value.shape() {
                return Err(Error::shape(
                    format!("gradient for '{name}'"),
                    entry.value.shape(),
                    g.shape(),
                ));
            }
            let m = entry.first_moment.data_mut();
            let v = entry.second_moment.data_mut();
            let p = entry.value.data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }
}
