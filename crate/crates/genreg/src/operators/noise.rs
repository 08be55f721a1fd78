//! Additive Gaussian noise and the Morozov discrepancy target.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, standard_normal};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

/// data + sigma * eps with eps i.i.d. standard normal from the seed.
pub fn add_noise(data: &Tensor, noise: &NoiseModel) -> Result<Tensor> {
    if noise.sigma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be nonnegative, got {}",
            noise.sigma
        )));
    }
    if noise.sigma == 0.0 {
        return Ok(data.clone());
    }
    let mut rng = rng_from_seed(noise.seed);
    let eps = standard_normal(data.shape(), &mut rng);
    data.axpy(noise.sigma, &eps)
}

/// Target discrepancy sigma * sqrt(m): the root of the expected squared
/// noise norm, E ||eps||_2^2 = sigma^2 m.
pub fn morozov_target(noise: &NoiseModel, data_len: usize) -> f64 {
    noise.sigma * (data_len as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_returns_data_unchanged() {
        let data = Tensor::from_vec(vec![1.0, -2.0, 3.0]);
        let out = add_noise(&data, &NoiseModel { sigma: 0.0, seed: 1 }).unwrap();
        assert_eq!(out.data(), data.data());
    }

    #[test]
    fn same_seed_same_noise() {
        let data = Tensor::zeros(&[64]);
        let nm = NoiseModel { sigma: 0.5, seed: 42 };
        let a = add_noise(&data, &nm).unwrap();
        let b = add_noise(&data, &nm).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn empirical_std_matches_sigma() {
        let data = Tensor::zeros(&[10_000]);
        let nm = NoiseModel {
            sigma: 0.1,
            seed: 7,
        };
        let out = add_noise(&data, &nm).unwrap();
        let mean = out.sum() / out.numel() as f64;
        let var = out.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / out.numel() as f64;
        let std = var.sqrt();
        assert!((std - 0.1).abs() <= 0.005, "std {std}");
    }

    #[test]
    fn morozov_values() {
        assert_eq!(morozov_target(&NoiseModel { sigma: 0.0, seed: 0 }, 50), 0.0);
        assert_eq!(morozov_target(&NoiseModel { sigma: 1.0, seed: 0 }, 1), 1.0);
        let t = morozov_target(&NoiseModel { sigma: 0.1, seed: 0 }, 400);
        assert!((t - 2.0).abs() < 1e-12);
    }
}
