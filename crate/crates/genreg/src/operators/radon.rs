//! Parallel-beam Radon transform and its exact adjoint.
//!
//! Pixel-driven discretisation: the image lives on [-1,1]^2; each pixel
//! centre is projected onto the detector axis for every angle and its
//! value scattered into the nearest detector bins (nearest-neighbour or
//! linear interpolation). Backprojection transposes the very same
//! weights, so the adjoint identity holds to rounding error by
//! construction. Weights are scaled by the pixel size so sinogram values
//! approximate line integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{check_shape, LinearOperator};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadonGeometry {
    /// Projection angles, uniform in [0, pi).
    pub n_angles: usize,
    /// Detector bins spanning the image diagonal.
    pub n_detectors: usize,
    pub interpolation: Interpolation,
}

impl RadonGeometry {
    /// Defaults for a square image: one angle per pixel row and enough
    /// detector bins to cover the diagonal.
    pub fn default_for(image_size: usize) -> Self {
        RadonGeometry {
            n_angles: image_size,
            n_detectors: (std::f64::consts::SQRT_2 * image_size as f64).ceil() as usize + 1,
            interpolation: Interpolation::Linear,
        }
    }
}

/// One pixel's contribution at one angle: up to two detector bins.
#[derive(Clone, Copy)]
struct PixelWeight {
    bin: u32,
    w0: f64,
    /// weight for `bin + 1`; zero for nearest-neighbour or clamped hits
    w1: f64,
}

pub struct RadonOp {
    geometry: RadonGeometry,
    size: usize,
    in_shape: Vec<usize>,
    out_shape: Vec<usize>,
    /// weights[a * n_pixels + p]
    weights: Vec<PixelWeight>,
}

impl RadonOp {
    pub fn new(image_size: usize, geometry: RadonGeometry) -> Result<Self> {
        if geometry.n_angles == 0 || geometry.n_detectors < 2 {
            return Err(Error::InvalidArgument(format!(
                "radon geometry needs n_angles >= 1 and n_detectors >= 2, got {} / {}",
                geometry.n_angles, geometry.n_detectors
            )));
        }
        let n = image_size;
        let n_det = geometry.n_detectors;
        let h = 2.0 / n as f64;
        let span = 2.0 * std::f64::consts::SQRT_2;
        let dt = span / n_det as f64;
        let t0 = -std::f64::consts::SQRT_2;

        let mut weights = Vec::with_capacity(geometry.n_angles * n * n);
        for a in 0..geometry.n_angles {
            let theta = a as f64 * std::f64::consts::PI / geometry.n_angles as f64;
            let (sin_t, cos_t) = theta.sin_cos();
            for i in 0..n {
                // row i is the y coordinate, top row at +1
                let y = 1.0 - (i as f64 + 0.5) * h;
                for j in 0..n {
                    let x = -1.0 + (j as f64 + 0.5) * h;
                    let t = x * cos_t + y * sin_t;
                    // continuous bin coordinate: bin centres at t0 + (d+0.5) dt
                    let c = (t - t0) / dt - 0.5;
                    let pw = match geometry.interpolation {
                        Interpolation::Nearest => {
                            let d = c.round().clamp(0.0, (n_det - 1) as f64) as u32;
                            PixelWeight {
                                bin: d,
                                w0: h,
                                w1: 0.0,
                            }
                        }
                        Interpolation::Linear => {
                            let d0 = c.floor();
                            let frac = c - d0;
                            let d0i = d0 as isize;
                            if d0i < 0 {
                                // everything collapses into bin 0
                                PixelWeight {
                                    bin: 0,
                                    w0: h,
                                    w1: 0.0,
                                }
                            } else if d0i as usize >= n_det - 1 {
                                PixelWeight {
                                    bin: (n_det - 1) as u32,
                                    w0: h,
                                    w1: 0.0,
                                }
                            } else {
                                PixelWeight {
                                    bin: d0i as u32,
                                    w0: (1.0 - frac) * h,
                                    w1: frac * h,
                                }
                            }
                        }
                    };
                    weights.push(pw);
                }
            }
        }
        Ok(RadonOp {
            geometry,
            size: n,
            in_shape: vec![n, n],
            out_shape: vec![geometry.n_angles, n_det],
            weights,
        })
    }

    pub fn geometry(&self) -> &RadonGeometry {
        &self.geometry
    }
}

impl LinearOperator for RadonOp {
    fn in_shape(&self) -> &[usize] {
        &self.in_shape
    }

    fn out_shape(&self) -> &[usize] {
        &self.out_shape
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        check_shape("radon apply", &self.in_shape, x)?;
        let n_px = self.size * self.size;
        let n_det = self.geometry.n_detectors;
        let mut sino = vec![0.0; self.geometry.n_angles * n_det];
        for a in 0..self.geometry.n_angles {
            let row = &mut sino[a * n_det..(a + 1) * n_det];
            let ws = &self.weights[a * n_px..(a + 1) * n_px];
            for (p, pw) in ws.iter().enumerate() {
                let v = x.data()[p];
                row[pw.bin as usize] += pw.w0 * v;
                if pw.w1 != 0.0 {
                    row[pw.bin as usize + 1] += pw.w1 * v;
                }
            }
        }
        Tensor::new(self.out_shape.clone(), sino)
    }

    fn adjoint(&self, y: &Tensor) -> Result<Tensor> {
        check_shape("radon adjoint", &self.out_shape, y)?;
        let n_px = self.size * self.size;
        let n_det = self.geometry.n_detectors;
        let mut img = vec![0.0; n_px];
        for a in 0..self.geometry.n_angles {
            let row = &y.data()[a * n_det..(a + 1) * n_det];
            let ws = &self.weights[a * n_px..(a + 1) * n_px];
            for (p, pw) in ws.iter().enumerate() {
                let mut acc = pw.w0 * row[pw.bin as usize];
                if pw.w1 != 0.0 {
                    acc += pw.w1 * row[pw.bin as usize + 1];
                }
                img[p] += acc;
            }
        }
        Tensor::new(self.in_shape.clone(), img)
    }
}

/// Sinogram of a square image.
pub fn radon_apply(image: &Tensor, geometry: RadonGeometry) -> Result<Tensor> {
    let shape = image.shape();
    if shape.len() != 2 || shape[0] != shape[1] {
        return Err(Error::InvalidArgument(format!(
            "radon transform needs a square image, got {shape:?}"
        )));
    }
    RadonOp::new(shape[0], geometry)?.apply(image)
}

/// Backprojection, the exact adjoint of [`radon_apply`].
pub fn radon_backproject(sinogram: &Tensor, image_size: usize, geometry: RadonGeometry) -> Result<Tensor> {
    RadonOp::new(image_size, geometry)?.adjoint(sinogram)
}
