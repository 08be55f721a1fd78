//! 'Same'-size 2-d convolution with zero padding and its exact adjoint.

use crate::error::{Error, Result};
use crate::operators::{check_shape, LinearOperator};
use crate::tensor::Tensor;

/// Normalised Gaussian kernel, `size` odd, entries summing to one.
pub fn gaussian_kernel(size: usize, width: f64) -> Result<Tensor> {
    if size % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "gaussian kernel size must be odd, got {size}"
        )));
    }
    if width <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "gaussian kernel width must be positive, got {width}"
        )));
    }
    let c = (size / 2) as isize;
    let mut data = Vec::with_capacity(size * size);
    for i in 0..size as isize {
        for j in 0..size as isize {
            let r2 = ((i - c) * (i - c) + (j - c) * (j - c)) as f64;
            data.push((-r2 / (2.0 * width * width)).exp());
        }
    }
    let total: f64 = data.iter().sum();
    for v in &mut data {
        *v /= total;
    }
    Tensor::new(vec![size, size], data)
}

/// Cross-correlation of `image` (H,W) with `kernel` (k,k), zero padding,
/// output the same size as the input.
pub fn conv_apply(image: &Tensor, kernel: &Tensor) -> Result<Tensor> {
    correlate(image, kernel, false)
}

/// Exact adjoint of [`conv_apply`]: correlation with the flipped kernel.
pub fn conv_adjoint(image: &Tensor, kernel: &Tensor) -> Result<Tensor> {
    correlate(image, kernel, true)
}

fn correlate(image: &Tensor, kernel: &Tensor, flip: bool) -> Result<Tensor> {
    if image.shape().len() != 2 || kernel.shape().len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "conv expects 2-d image and kernel, got {:?} and {:?}",
            image.shape(),
            kernel.shape()
        )));
    }
    let (h, w) = (image.shape()[0], image.shape()[1]);
    let (kh, kw) = (kernel.shape()[0], kernel.shape()[1]);
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "conv kernel must have odd sides, got {kh}x{kw}"
        )));
    }
    if kh > h || kw > w {
        return Err(Error::InvalidArgument(format!(
            "kernel {kh}x{kw} larger than image {h}x{w}"
        )));
    }
    let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    let mut out = Tensor::zeros(&[h, w]);
    for i in 0..h as isize {
        for j in 0..w as isize {
            let mut acc = 0.0;
            for ki in 0..kh as isize {
                for kj in 0..kw as isize {
                    let ii = i + ki - ch;
                    let jj = j + kj - cw;
                    if ii < 0 || jj < 0 || ii >= h as isize || jj >= w as isize {
                        continue;
                    }
                    let kv = if flip {
                        kernel.at2((kh as isize - 1 - ki) as usize, (kw as isize - 1 - kj) as usize)
                    } else {
                        kernel.at2(ki as usize, kj as usize)
                    };
                    acc += image.at2(ii as usize, jj as usize) * kv;
                }
            }
            out.set2(i as usize, j as usize, acc);
        }
    }
    Ok(out)
}

/// Deconvolution forward model: blur by a fixed kernel.
pub struct ConvOp {
    kernel: Tensor,
    shape: Vec<usize>,
}

impl ConvOp {
    pub fn new(kernel: Tensor, image_shape: (usize, usize)) -> Result<Self> {
        let (h, w) = image_shape;
        if kernel.shape().len() != 2 || kernel.shape()[0] > h || kernel.shape()[1] > w {
            return Err(Error::InvalidArgument(format!(
                "kernel {:?} incompatible with image {h}x{w}",
                kernel.shape()
            )));
        }
        Ok(ConvOp {
            kernel,
            shape: vec![h, w],
        })
    }

    pub fn kernel(&self) -> &Tensor {
        &self.kernel
    }
}

impl LinearOperator for ConvOp {
    fn in_shape(&self) -> &[usize] {
        &self.shape
    }

    fn out_shape(&self) -> &[usize] {
        &self.shape
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        check_shape("conv apply", &self.shape, x)?;
        conv_apply(x, &self.kernel)
    }

    fn adjoint(&self, y: &Tensor) -> Result<Tensor> {
        check_shape("conv adjoint", &self.shape, y)?;
        conv_adjoint(y, &self.kernel)
    }
}
