//! Layer descriptors, shape inference, parameter initialisation and the
//! forward pass. A network is a plain `Vec<Layer>`; all state lives in a
//! [`ParamSet`] keyed by `"{layer}.w"` / `"{layer}.b"`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::conv::ConvSpec;
use crate::autodiff::params::ParamSet;
use crate::autodiff::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::{standard_normal, SeededRng};
use crate::tensor::Tensor;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Dense {
        name: String,
        in_dim: usize,
        out_dim: usize,
    },
    Conv2d {
        name: String,
        spec: ConvSpec,
    },
    ConvTranspose2d {
        name: String,
        spec: ConvSpec,
    },
    LeakyRelu {
        alpha: f64,
    },
    Relu,
    Sigmoid,
    Tanh,
    /// Per-sample reshape; the batch axis is preserved.
    Reshape {
        shape: Vec<usize>,
    },
    /// Inverted dropout, active only in [`Mode::Train`].
    Dropout {
        p: f64,
    },
}

impl Layer {
    fn describe(&self) -> String {
        match self {
            Layer::Dense {
                name,
                in_dim,
                out_dim,
            } => format!("dense '{name}' ({in_dim}->{out_dim})"),
            Layer::Conv2d { name, spec } => format!(
                "conv2d '{name}' ({}->{}, k{}, s{}, p{})",
                spec.in_ch, spec.out_ch, spec.kernel, spec.stride, spec.pad
            ),
            Layer::ConvTranspose2d { name, spec } => format!(
                "conv_transpose2d '{name}' ({}->{}, k{}, s{}, p{})",
                spec.in_ch, spec.out_ch, spec.kernel, spec.stride, spec.pad
            ),
            Layer::LeakyRelu { alpha } => format!("leaky_relu(alpha={alpha})"),
            Layer::Relu => "relu".to_string(),
            Layer::Sigmoid => "sigmoid".to_string(),
            Layer::Tanh => "tanh".to_string(),
            Layer::Reshape { shape } => format!("reshape{shape:?}"),
            Layer::Dropout { p } => format!("dropout(p={p})"),
        }
    }

    /// Per-sample output shape given a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let fail = |why: &str| {
            Err(Error::InvalidArgument(format!(
                "{}: input shape {:?} invalid: {}",
                self.describe(),
                input,
                why
            )))
        };
        match self {
            Layer::Dense { in_dim, out_dim, .. } => {
                if input != [*in_dim] {
                    return fail(&format!("expected [{in_dim}]"));
                }
                Ok(vec![*out_dim])
            }
            Layer::Conv2d { spec, .. } => {
                if input.len() != 3 || input[0] != spec.in_ch {
                    return fail(&format!("expected [{}, H, W]", spec.in_ch));
                }
                let (oh, ow) = spec.conv_out_hw(input[1], input[2])?;
                Ok(vec![spec.out_ch, oh, ow])
            }
            Layer::ConvTranspose2d { spec, .. } => {
                if input.len() != 3 || input[0] != spec.in_ch {
                    return fail(&format!("expected [{}, H, W]", spec.in_ch));
                }
                let (oh, ow) = spec.convt_out_hw(input[1], input[2])?;
                Ok(vec![spec.out_ch, oh, ow])
            }
            Layer::Reshape { shape } => {
                let have: usize = input.iter().product();
                let want: usize = shape.iter().product();
                if have != want {
                    return fail(&format!("cannot reshape to {shape:?}"));
                }
                Ok(shape.clone())
            }
            _ => Ok(input.to_vec()),
        }
    }
}

/// Whether dropout is live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Leaf vars for a parameter set, created once per tape so repeated
/// forward passes share the same leaves.
pub struct Bindings {
    vars: BTreeMap<String, Var>,
}

impl Bindings {
    pub fn bind(tape: &mut Tape, params: &ParamSet) -> Self {
        let mut vars = BTreeMap::new();
        for (name, value) in params.iter() {
            vars.insert(name.to_string(), tape.leaf(value.clone().with_grad()));
        }
        Bindings { vars }
    }

    /// Bind without gradient tracking (inference).
    pub fn bind_frozen(tape: &mut Tape, params: &ParamSet) -> Self {
        let mut vars = BTreeMap::new();
        for (name, value) in params.iter() {
            vars.insert(name.to_string(), tape.constant(value.clone()));
        }
        Bindings { vars }
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unbound parameter '{name}'")))
    }

    /// Collect the named gradient map after a backward pass. Parameters
    /// the loss never reached get zero gradients.
    pub fn gradients(
        &self,
        tape: &Tape,
        grads: &crate::autodiff::tape::GradMap,
    ) -> BTreeMap<String, Tensor> {
        self.vars
            .iter()
            .map(|(n, &v)| (n.clone(), grads.grad_or_zeros(tape, v)))
            .collect()
    }
}

/// Apply one layer to a batched input var.
pub fn apply_layer(
    tape: &mut Tape,
    x: Var,
    layer: &Layer,
    bindings: &Bindings,
    mode: Mode,
    rng: Option<&mut SeededRng>,
) -> Result<Var> {
    let in_shape = tape.value(x).shape().to_vec();
    if in_shape.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{}: input must have a batch axis",
            layer.describe()
        )));
    }
    // validate against the per-sample shape rules for a precise error
    layer.output_shape(&in_shape[1..]).map_err(|e| {
        Error::InvalidArgument(format!("{} (batched input {:?})", e, in_shape))
    })?;
    match layer {
        Layer::Dense { name, .. } => {
            let w = bindings.var(&format!("{name}.w"))?;
            let b = bindings.var(&format!("{name}.b"))?;
            let y = tape.matmul(x, w, false, true)?;
            tape.add_row_bias(y, b)
        }
        Layer::Conv2d { name, spec } => {
            let w = bindings.var(&format!("{name}.w"))?;
            let b = bindings.var(&format!("{name}.b"))?;
            let y = tape.conv2d(x, w, *spec)?;
            tape.add_channel_bias(y, b)
        }
        Layer::ConvTranspose2d { name, spec } => {
            let w = bindings.var(&format!("{name}.w"))?;
            let b = bindings.var(&format!("{name}.b"))?;
            let y = tape.conv_transpose2d(x, w, *spec)?;
            tape.add_channel_bias(y, b)
        }
        Layer::LeakyRelu { alpha } => Ok(tape.leaky_relu(x, *alpha)),
        Layer::Relu => Ok(tape.relu(x)),
        Layer::Sigmoid => Ok(tape.sigmoid(x)),
        Layer::Tanh => Ok(tape.tanh(x)),
        Layer::Reshape { shape } => {
            let mut full = vec![in_shape[0]];
            full.extend_from_slice(shape);
            tape.reshape(x, &full)
        }
        Layer::Dropout { p } => match (mode, rng) {
            (Mode::Eval, _) => Ok(x),
            (Mode::Train, Some(rng)) => {
                let keep = 1.0 - p;
                let mask_data: Vec<f64> = (0..tape.value(x).numel())
                    .map(|_| {
                        if rng.gen_range(0.0..1.0) < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let mask = Tensor::new(in_shape, mask_data)?;
                tape.hadamard_const(x, mask)
            }
            (Mode::Train, None) => Err(Error::InvalidArgument(
                "dropout in train mode needs an rng".to_string(),
            )),
        },
    }
}

/// A feed-forward stack with a fixed per-sample input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Self {
        Network {
            input_shape,
            layers,
        }
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        let mut shape = self.input_shape.clone();
        for layer in &self.layers {
            shape = layer.output_shape(&shape)?;
        }
        Ok(shape)
    }

    /// He-normal weights (std = sqrt(2 / fan_in)), zero biases.
    pub fn init_params(&self, rng: &mut SeededRng) -> Result<ParamSet> {
        let mut params = ParamSet::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense {
                    name,
                    in_dim,
                    out_dim,
                } => {
                    let std = (2.0 / *in_dim as f64).sqrt();
                    let w = standard_normal(&[*out_dim, *in_dim], rng).scale(std);
                    params.insert(format!("{name}.w"), w)?;
                    params.insert(format!("{name}.b"), Tensor::zeros(&[*out_dim]))?;
                }
                Layer::Conv2d { name, spec } => {
                    let fan_in = (spec.in_ch * spec.kernel * spec.kernel) as f64;
                    let std = (2.0 / fan_in).sqrt();
                    let w = standard_normal(
                        &[spec.out_ch, spec.in_ch, spec.kernel, spec.kernel],
                        rng,
                    )
                    .scale(std);
                    params.insert(format!("{name}.w"), w)?;
                    params.insert(format!("{name}.b"), Tensor::zeros(&[spec.out_ch]))?;
                }
                Layer::ConvTranspose2d { name, spec } => {
                    let fan_in = (spec.in_ch * spec.kernel * spec.kernel) as f64;
                    let std = (2.0 / fan_in).sqrt();
                    let w = standard_normal(
                        &[spec.in_ch, spec.out_ch, spec.kernel, spec.kernel],
                        rng,
                    )
                    .scale(std);
                    params.insert(format!("{name}.w"), w)?;
                    params.insert(format!("{name}.b"), Tensor::zeros(&[spec.out_ch]))?;
                }
                _ => {}
            }
        }
        Ok(params)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        bindings: &Bindings,
        x: Var,
        mode: Mode,
        mut rng: Option<&mut SeededRng>,
    ) -> Result<Var> {
        let mut cur = x;
        for layer in &self.layers {
            cur = apply_layer(tape, cur, layer, bindings, mode, rng.as_deref_mut())?;
        }
        Ok(cur)
    }

    /// Per-sample gradient of a scalar-output network with respect to its
    /// input, built *on the tape* so the result can itself be
    /// differentiated (with respect to the parameters).
    ///
    /// This unrolls the backward pass as forward ops: linear layers apply
    /// their transpose, smooth activations contribute their exact on-tape
    /// derivative, and the relu-family masks enter as constants (their
    /// parameter-derivative is zero almost everywhere). Needed for the
    /// gradient-penalty term of the Wasserstein critic loss.
    pub fn input_gradient(
        &self,
        tape: &mut Tape,
        bindings: &Bindings,
        x: Var,
        mut rng: Option<&mut SeededRng>,
        mode: Mode,
    ) -> Result<Var> {
        let out_shape = self.output_shape()?;
        if out_shape.iter().product::<usize>() != 1 {
            return Err(Error::InvalidArgument(format!(
                "input_gradient needs a scalar-per-sample output, network emits {out_shape:?}"
            )));
        }
        // forward, keeping per-layer inputs and outputs
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x;
        let mut dropout_masks: Vec<Option<Tensor>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            inputs.push(cur);
            if let Layer::Dropout { p } = layer {
                // sample once and reuse in the reverse sweep
                if mode == Mode::Train {
                    let rng = rng.as_deref_mut().ok_or_else(|| {
                        Error::InvalidArgument("dropout in train mode needs an rng".to_string())
                    })?;
                    let keep = 1.0 - p;
                    let mask_data: Vec<f64> = (0..tape.value(cur).numel())
                        .map(|_| {
                            if rng.gen_range(0.0..1.0) < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let mask = Tensor::new(tape.value(cur).shape().to_vec(), mask_data)?;
                    cur = tape.hadamard_const(cur, mask.clone())?;
                    dropout_masks.push(Some(mask));
                } else {
                    dropout_masks.push(None);
                }
            } else {
                cur = apply_layer(tape, cur, layer, bindings, Mode::Eval, None)?;
                dropout_masks.push(None);
            }
        }
        let outputs_after: Vec<Var> = {
            // layer i maps inputs[i] -> (inputs[i+1] or cur)
            let mut v = inputs[1..].to_vec();
            v.push(cur);
            v
        };

        let batch = tape.value(x).shape()[0];
        let mut g = tape.constant(Tensor::filled(tape.value(cur).shape(), 1.0));
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let layer_in = inputs[i];
            let layer_out = outputs_after[i];
            g = match layer {
                Layer::Dense { name, .. } => {
                    let w = bindings.var(&format!("{name}.w"))?;
                    tape.matmul(g, w, false, false)?
                }
                Layer::Conv2d { name, spec } => {
                    let w = bindings.var(&format!("{name}.w"))?;
                    let in_hw = {
                        let s = tape.value(layer_in).shape();
                        (s[2], s[3])
                    };
                    // the VJP of a conv is a transposed conv with the same
                    // kernel; round-trip shapes must match exactly
                    let dual = ConvSpec {
                        in_ch: spec.out_ch,
                        out_ch: spec.in_ch,
                        kernel: spec.kernel,
                        stride: spec.stride,
                        pad: spec.pad,
                    };
                    let back = tape.conv_transpose2d(g, w, dual)?;
                    let got = tape.value(back).shape();
                    if (got[2], got[3]) != in_hw {
                        return Err(Error::InvalidArgument(format!(
                            "{}: stride/pad combination is not exactly invertible \
                             ({}x{} -> {}x{})",
                            layer.describe(),
                            in_hw.0,
                            in_hw.1,
                            got[2],
                            got[3]
                        )));
                    }
                    back
                }
                Layer::ConvTranspose2d { name, spec } => {
                    let w = bindings.var(&format!("{name}.w"))?;
                    let dual = ConvSpec {
                        in_ch: spec.out_ch,
                        out_ch: spec.in_ch,
                        kernel: spec.kernel,
                        stride: spec.stride,
                        pad: spec.pad,
                    };
                    tape.conv2d(g, w, dual)?
                }
                Layer::LeakyRelu { alpha } => {
                    let alpha = *alpha;
                    let mask = tape
                        .value(layer_in)
                        .map(|v| if v > 0.0 { 1.0 } else { alpha });
                    tape.hadamard_const(g, mask)?
                }
                Layer::Relu => {
                    let mask = tape
                        .value(layer_in)
                        .map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    tape.hadamard_const(g, mask)?
                }
                Layer::Sigmoid => {
                    // d/da sigmoid = s (1 - s), with s itself on the tape
                    let s = layer_out;
                    let s2 = tape.mul(s, s)?;
                    let d = tape.sub(s, s2)?;
                    tape.mul(g, d)?
                }
                Layer::Tanh => {
                    let t = layer_out;
                    let t2 = tape.mul(t, t)?;
                    let neg = tape.scale(t2, -1.0);
                    let d = tape.add_scalar(neg, 1.0);
                    tape.mul(g, d)?
                }
                Layer::Reshape { .. } => {
                    let shape = tape.value(layer_in).shape().to_vec();
                    tape.reshape(g, &shape)?
                }
                Layer::Dropout { .. } => match &dropout_masks[i] {
                    Some(mask) => tape.hadamard_const(g, mask.clone())?,
                    None => g,
                },
            };
        }
        debug_assert_eq!(tape.value(g).shape()[0], batch);
        Ok(g)
    }
}
