//! Closed-form proximal maps used by the sparse reconstruction methods.

use crate::solvers::backtrack::ProxTerm;
use crate::tensor::Tensor;

/// Soft thresholding: the exact prox of `tau * ||.||_1`.
pub fn prox_l1(v: &Tensor, tau: f64) -> Tensor {
    debug_assert!(tau >= 0.0);
    v.map(|x| x.signum() * (x.abs() - tau).max(0.0))
}

/// Prox of `tau * mu * ||.||_2^2`, i.e. shrinkage `v / (1 + 2 tau mu)`.
pub fn prox_scaled_sqnorm(v: &Tensor, tau: f64, mu: f64) -> Tensor {
    debug_assert!(tau >= 0.0 && mu >= 0.0);
    v.scale(1.0 / (1.0 + 2.0 * tau * mu))
}

/// `weight * ||.||_1` as a PALM block regulariser.
pub struct L1Term {
    pub weight: f64,
}

impl ProxTerm for L1Term {
    fn value(&self, v: &Tensor) -> f64 {
        self.weight * v.data().iter().map(|x| x.abs()).sum::<f64>()
    }

    fn prox(&self, v: &Tensor, tau: f64) -> Tensor {
        prox_l1(v, tau * self.weight)
    }
}

/// `weight * ||.||_2^2` as a PALM block regulariser.
pub struct SqNormTerm {
    pub weight: f64,
}

impl ProxTerm for SqNormTerm {
    fn value(&self, v: &Tensor) -> f64 {
        self.weight * v.sqnorm()
    }

    fn prox(&self, v: &Tensor, tau: f64) -> Tensor {
        prox_scaled_sqnorm(v, tau, self.weight)
    }
}
