//! Latent-space diagnostics: random 2-d projections, interpolation
//! grids, and sampling far from the prior's high-probability region.

use crate::error::{Error, Result};
use crate::models::GeneratorModel;
use crate::rng::{rng_from_seed, standard_normal};
use crate::tensor::Tensor;

/// Seeded Gaussian projection matrix (2, dim), entries N(0, 1/2) so a
/// projected standard normal keeps unit expected squared radius per axis
/// pair. Rows are not orthogonalised; a random projection is enough for
/// the qualitative comparison.
pub fn gaussian_projection(dim: usize, seed: u64) -> Tensor {
    let mut rng = rng_from_seed(seed);
    standard_normal(&[2, dim], &mut rng).scale((0.5f64).sqrt())
}

/// Apply a (2, dim) projection to a list of latents.
pub fn apply_projection(matrix: &Tensor, latents: &[Tensor]) -> Result<Vec<[f64; 2]>> {
    let dim = matrix.shape()[1];
    latents
        .iter()
        .map(|z| {
            if z.shape() != [dim] {
                return Err(Error::shape("projection latent", &[dim], z.shape()));
            }
            let mut p = [0.0; 2];
            for (r, out) in p.iter_mut().enumerate() {
                *out = (0..dim).map(|k| matrix.data()[r * dim + k] * z.data()[k]).sum();
            }
            Ok(p)
        })
        .collect()
}

/// Project encodings and reference (standard normal) latents through one
/// shared seeded matrix, so both point clouds live on the same axes.
pub fn latent_projection_2d(
    latents: &[Tensor],
    reference: &[Tensor],
    seed: u64,
) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>)> {
    if latents.is_empty() {
        return Err(Error::InvalidArgument("no latents to project".to_string()));
    }
    let dim = latents[0].shape()[0];
    let matrix = gaussian_projection(dim, seed);
    Ok((
        apply_projection(&matrix, latents)?,
        apply_projection(&matrix, reference)?,
    ))
}

/// Interpolation sheet `G(z1 + a1 (z2 - z1) + a2 (z3 - z1))` over the
/// alpha grid; the three anchor corners reproduce G(z1), G(z2), G(z3)
/// exactly (the affine combination is special-cased there so no rounding
/// enters).
pub fn interpolation_grid(
    generator: &GeneratorModel,
    z1: &Tensor,
    z2: &Tensor,
    z3: &Tensor,
    alphas: &[f64],
) -> Result<Vec<Vec<Tensor>>> {
    for z in [z1, z2, z3] {
        if z.shape() != [generator.latent_dim] {
            return Err(Error::shape(
                "interpolation latent",
                &[generator.latent_dim],
                z.shape(),
            ));
        }
    }
    let mut rows = Vec::with_capacity(alphas.len());
    for &a1 in alphas {
        let mut row = Vec::with_capacity(alphas.len());
        for &a2 in alphas {
            let z = if a1 == 0.0 && a2 == 0.0 {
                z1.clone()
            } else if a1 == 1.0 && a2 == 0.0 {
                z2.clone()
            } else if a1 == 0.0 && a2 == 1.0 {
                z3.clone()
            } else {
                let d2 = z2.sub(z1)?;
                let d3 = z3.sub(z1)?;
                z1.axpy(a1, &d2)?.axpy(a2, &d3)?
            };
            row.push(generator.generate(&z)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// The default five-point alpha grid {0, 0.25, 0.5, 0.75, 1}.
pub const ALPHA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Generate from latents at a fixed radius: `z = radius * direction`
/// with seeded uniform random directions, far outside the prior bulk
/// when the radius is large. Returns (latents, images).
pub fn sample_far_from_prior(
    generator: &GeneratorModel,
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    if radius <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut latents = Vec::with_capacity(count);
    let mut images = Vec::with_capacity(count);
    for _ in 0..count {
        let direction = loop {
            let d = standard_normal(&[generator.latent_dim], &mut rng);
            let n = d.norm();
            if n > 1e-12 {
                break d.scale(1.0 / n);
            }
        };
        let z = direction.scale(radius);
        images.push(generator.generate(&z)?);
        latents.push(z);
    }
    Ok((latents, images))
}
