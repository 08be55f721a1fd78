//! Log-spaced regularisation-parameter sweeps with PSNR-based selection
//! on a tuning split.

use crate::error::Result;

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2, "log grid needs 0 < lo < hi, count >= 2");
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Outcome of one grid point: the tuning-split mean PSNR.
#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub lambda: f64,
    pub mu: f64,
    pub mean_psnr: f64,
}

/// Evaluate `score` on the (lambda, mu) product grid and return every
/// point plus the argmax (ties: first in iteration order, i.e. smallest
/// lambda then mu).
pub fn tune_grid(
    lambdas: &[f64],
    mus: &[f64],
    mut score: impl FnMut(f64, f64) -> Result<f64>,
) -> Result<(Vec<GridPoint>, GridPoint)> {
    let mut points = Vec::with_capacity(lambdas.len() * mus.len());
    let mut best: Option<GridPoint> = None;
    for &lambda in lambdas {
        for &mu in mus {
            let mean_psnr = score(lambda, mu)?;
            let p = GridPoint {
                lambda,
                mu,
                mean_psnr,
            };
            points.push(p);
            if best.map(|b| mean_psnr > b.mean_psnr).unwrap_or(true) {
                best = Some(p);
            }
        }
    }
    Ok((points, best.expect("non-empty grid")))
}
