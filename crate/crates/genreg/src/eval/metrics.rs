//! Reconstruction quality metrics.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// PSNR ceiling reported when two images are exactly equal.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio `10 log10(peak^2 / MSE)` in dB. Identical
/// images return the +inf sentinel capped at [`PSNR_CAP_DB`].
pub fn psnr(x: &Tensor, reference: &Tensor, peak: f64) -> Result<f64> {
    if x.shape() != reference.shape() {
        return Err(Error::shape("psnr", reference.shape(), x.shape()));
    }
    if peak <= 0.0 {
        return Err(Error::InvalidArgument(format!("psnr peak must be positive, got {peak}")));
    }
    let mse = x.sub(reference)?.sqnorm() / x.numel() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// Normalised root-mean-square error `||x - ref|| / ||ref||`.
pub fn nrmse(x: &Tensor, reference: &Tensor) -> Result<f64> {
    if x.shape() != reference.shape() {
        return Err(Error::shape("nrmse", reference.shape(), x.shape()));
    }
    let denom = reference.norm();
    if denom == 0.0 {
        return Err(Error::InvalidArgument(
            "nrmse reference must be nonzero".to_string(),
        ));
    }
    Ok(x.sub(reference)?.norm() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, standard_normal, uniform};

    #[test]
    fn uniform_error_gives_twenty_db() {
        // constant error of 0.1 on every pixel: MSE = 0.01, peak 1 -> 20 dB
        let reference = uniform(&[8, 8], 0.0, 0.5, &mut rng_from_seed(1));
        let x = reference.map(|v| v + 0.1);
        let db = psnr(&x, &reference, 1.0).unwrap();
        assert!((db - 20.0).abs() < 1e-12, "{db}");
    }

    #[test]
    fn identical_images_hit_the_cap() {
        let x = uniform(&[4, 4], 0.0, 1.0, &mut rng_from_seed(2));
        assert_eq!(psnr(&x, &x, 1.0).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn psnr_invariant_under_shared_permutation() {
        let mut rng = rng_from_seed(3);
        let a = uniform(&[3, 4], 0.0, 1.0, &mut rng);
        let b = uniform(&[3, 4], 0.0, 1.0, &mut rng);
        let p = psnr(&a, &b, 1.0).unwrap();
        // reverse both images identically
        let ar = Tensor::new(vec![3, 4], a.data().iter().rev().cloned().collect()).unwrap();
        let br = Tensor::new(vec![3, 4], b.data().iter().rev().cloned().collect()).unwrap();
        assert_eq!(p, psnr(&ar, &br, 1.0).unwrap());
    }

    #[test]
    fn nrmse_basic_cases() {
        let r = uniform(&[5, 5], 0.1, 1.0, &mut rng_from_seed(4));
        assert_eq!(nrmse(&r, &r).unwrap(), 0.0);
        let twice = r.scale(2.0);
        assert!((nrmse(&twice, &r).unwrap() - 1.0).abs() < 1e-12);
        let zero = Tensor::zeros(&[5, 5]);
        assert!((nrmse(&zero, &r).unwrap() - 1.0).abs() < 1e-12);
        assert!(nrmse(&r, &zero).is_err());
    }

    #[test]
    fn psnr_strictly_decreasing_in_nrmse() {
        let reference = uniform(&[6, 6], 0.2, 0.9, &mut rng_from_seed(5));
        let noise = standard_normal(&[6, 6], &mut rng_from_seed(6));
        let mut last_psnr = f64::INFINITY;
        let mut last_nrmse = 0.0;
        for k in 1..6 {
            let x = reference.axpy(0.02 * k as f64, &noise).unwrap();
            let p = psnr(&x, &reference, 1.0).unwrap();
            let n = nrmse(&x, &reference).unwrap();
            assert!(n > last_nrmse);
            assert!(p < last_psnr);
            last_psnr = p;
            last_nrmse = n;
        }
    }
}
