//! Linear forward models with exact adjoints, plus the Gaussian noise
//! model, for the three inverse problems: deconvolution, compressed
//! sensing and parallel-beam tomography.

mod convolution;
mod noise;
mod radon;
mod sensing;

pub use convolution::{conv_adjoint, conv_apply, gaussian_kernel, ConvOp};
pub use noise::{add_noise, morozov_target, NoiseModel};
pub use radon::{radon_apply, radon_backproject, Interpolation, RadonGeometry, RadonOp};
pub use sensing::{gaussian_sensing, SensingOp};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, standard_normal};
use crate::tensor::Tensor;

/// A linear map between tensor spaces with an exact adjoint.
///
/// Implementations are immutable after construction; `apply` and
/// `adjoint` are pure and safe to call concurrently.
pub trait LinearOperator: Send + Sync {
    fn in_shape(&self) -> &[usize];
    fn out_shape(&self) -> &[usize];
    fn apply(&self, x: &Tensor) -> Result<Tensor>;
    fn adjoint(&self, y: &Tensor) -> Result<Tensor>;

    /// Power-iteration estimate of the operator 2-norm.
    fn norm_estimate(&self, iters: usize, seed: u64) -> Result<f64> {
        let mut rng = rng_from_seed(seed);
        let mut v = standard_normal(self.in_shape(), &mut rng);
        let mut sigma = 0.0;
        for _ in 0..iters {
            let n = v.norm();
            if n == 0.0 {
                return Ok(0.0);
            }
            v = v.scale(1.0 / n);
            let w = self.apply(&v)?;
            sigma = w.norm();
            v = self.adjoint(&w)?;
        }
        Ok(sigma)
    }
}

pub(crate) fn check_shape(what: &str, expected: &[usize], t: &Tensor) -> Result<()> {
    if t.shape() != expected {
        return Err(Error::shape(what, expected, t.shape()));
    }
    Ok(())
}

/// Identity operator on a given shape; the sensing module's test hook and
/// a convenient baseline for denoising instances.
pub struct IdentityOp {
    shape: Vec<usize>,
}

impl IdentityOp {
    pub fn new(shape: &[usize]) -> Self {
        IdentityOp {
            shape: shape.to_vec(),
        }
    }
}

impl LinearOperator for IdentityOp {
    fn in_shape(&self) -> &[usize] {
        &self.shape
    }

    fn out_shape(&self) -> &[usize] {
        &self.shape
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        check_shape("identity apply", &self.shape, x)?;
        Ok(x.clone())
    }

    fn adjoint(&self, y: &Tensor) -> Result<Tensor> {
        check_shape("identity adjoint", &self.shape, y)?;
        Ok(y.clone())
    }
}
