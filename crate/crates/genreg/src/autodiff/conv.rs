//! im2col-based 2-d convolution and transposed convolution kernels.
//!
//! Everything here operates on batched tensors laid out (N, C, H, W) with
//! zero padding. The transposed convolution is realised through the
//! conv/conv-adjoint duality: its forward pass is the input-gradient of a
//! stride-`s` convolution, so the three routines below close under
//! differentiation.

use serde::{Deserialize, Serialize};

use crate::autodiff::gemm::{gemm, MatRef};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Static description of a conv (or transposed conv) application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvSpec {
    /// Output spatial size of a convolution over an `h x w` input.
    pub fn conv_out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let k = self.kernel;
        let (he, we) = (h + 2 * self.pad, w + 2 * self.pad);
        if he < k || we < k {
            return Err(Error::InvalidArgument(format!(
                "conv kernel {k} larger than padded input {he}x{we}"
            )));
        }
        Ok(((he - k) / self.stride + 1, (we - k) / self.stride + 1))
    }

    /// Output spatial size of a transposed convolution.
    pub fn convt_out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let grow = |n: usize| -> Result<usize> {
            let v = (n - 1) * self.stride + self.kernel;
            if v < 2 * self.pad {
                return Err(Error::InvalidArgument(format!(
                    "transposed conv output underflow for input {n}"
                )));
            }
            Ok(v - 2 * self.pad)
        };
        Ok((grow(h)?, grow(w)?))
    }
}

/// Scatter an image into the (C*k*k, Ho*Wo) patch matrix.
fn im2col(
    x: &[f64],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    cols: &mut [f64],
) {
    debug_assert_eq!(cols.len(), c * k * k * oh * ow);
    cols.fill(0.0);
    let pad = pad as isize;
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * oh * ow;
                for oi in 0..oh {
                    let ii = (oi * stride) as isize + ki as isize - pad;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    let src = ii as usize * w;
                    let dst = row + oi * ow;
                    for oj in 0..ow {
                        let jj = (oj * stride) as isize + kj as isize - pad;
                        if jj >= 0 && jj < w as isize {
                            cols[dst + oj] = plane[src + jj as usize];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulate the patch matrix back into an image.
fn col2im(
    cols: &[f64],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    x: &mut [f64],
) {
    debug_assert_eq!(cols.len(), c * k * k * oh * ow);
    let pad = pad as isize;
    for ci in 0..c {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * oh * ow;
                for oi in 0..oh {
                    let ii = (oi * stride) as isize + ki as isize - pad;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    let dst = ii as usize * w;
                    let src = row + oi * ow;
                    for oj in 0..ow {
                        let jj = (oj * stride) as isize + kj as isize - pad;
                        if jj >= 0 && jj < w as isize {
                            plane[dst + jj as usize] += cols[src + oj];
                        }
                    }
                }
            }
        }
    }
}

fn check_input(x: &Tensor, ch: usize, what: &str) -> Result<(usize, usize, usize)> {
    let s = x.shape();
    if s.len() != 4 || s[1] != ch {
        return Err(Error::InvalidArgument(format!(
            "{what} expects (N,{ch},H,W) input, got {s:?}"
        )));
    }
    Ok((s[0], s[2], s[3]))
}

/// y[n,co,:,:] = sum_ci w[co,ci] * x[n,ci] patches; kernel (Cout,Cin,k,k).
pub fn conv2d_forward(x: &Tensor, w: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let (n, h, wd) = check_input(x, spec.in_ch, "conv2d")?;
    let (oh, ow) = spec.conv_out_hw(h, wd)?;
    let k = spec.kernel;
    let ckk = spec.in_ch * k * k;
    let mut cols = vec![0.0; ckk * oh * ow];
    let mut out = vec![0.0; n * spec.out_ch * oh * ow];
    for ni in 0..n {
        im2col(
            &x.data()[ni * spec.in_ch * h * wd..],
            spec.in_ch,
            h,
            wd,
            k,
            spec.stride,
            spec.pad,
            oh,
            ow,
            &mut cols,
        );
        gemm(
            1.0,
            MatRef::new(&w.data()[..spec.out_ch * ckk], spec.out_ch, ckk),
            MatRef::new(&cols, ckk, oh * ow),
            0.0,
            &mut out[ni * spec.out_ch * oh * ow..(ni + 1) * spec.out_ch * oh * ow],
        );
    }
    Tensor::new(vec![n, spec.out_ch, oh, ow], out)
}

/// Gradient of [`conv2d_forward`] w.r.t. its input.
pub fn conv2d_backward_input(
    gy: &Tensor,
    w: &Tensor,
    spec: &ConvSpec,
    in_hw: (usize, usize),
) -> Result<Tensor> {
    let (n, oh, ow) = check_input(gy, spec.out_ch, "conv2d_backward_input")?;
    let (h, wd) = in_hw;
    let k = spec.kernel;
    let ckk = spec.in_ch * k * k;
    let mut cols = vec![0.0; ckk * oh * ow];
    let mut gx = vec![0.0; n * spec.in_ch * h * wd];
    for ni in 0..n {
        gemm(
            1.0,
            MatRef::new(&w.data()[..spec.out_ch * ckk], spec.out_ch, ckk).t(),
            MatRef::new(
                &gy.data()[ni * spec.out_ch * oh * ow..(ni + 1) * spec.out_ch * oh * ow],
                spec.out_ch,
                oh * ow,
            ),
            0.0,
            &mut cols,
        );
        col2im(
            &cols,
            spec.in_ch,
            h,
            wd,
            k,
            spec.stride,
            spec.pad,
            oh,
            ow,
            &mut gx[ni * spec.in_ch * h * wd..(ni + 1) * spec.in_ch * h * wd],
        );
    }
    Tensor::new(vec![n, spec.in_ch, h, wd], gx)
}

/// Gradient of [`conv2d_forward`] w.r.t. the kernel.
pub fn conv2d_backward_kernel(x: &Tensor, gy: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let (n, h, wd) = check_input(x, spec.in_ch, "conv2d_backward_kernel")?;
    let (ng, oh, ow) = check_input(gy, spec.out_ch, "conv2d_backward_kernel")?;
    if n != ng {
        return Err(Error::InvalidArgument(format!(
            "conv2d_backward_kernel batch mismatch {n} vs {ng}"
        )));
    }
    let k = spec.kernel;
    let ckk = spec.in_ch * k * k;
    let mut cols = vec![0.0; ckk * oh * ow];
    let mut gw = vec![0.0; spec.out_ch * ckk];
    for ni in 0..n {
        im2col(
            &x.data()[ni * spec.in_ch * h * wd..],
            spec.in_ch,
            h,
            wd,
            k,
            spec.stride,
            spec.pad,
            oh,
            ow,
            &mut cols,
        );
        gemm(
            1.0,
            MatRef::new(
                &gy.data()[ni * spec.out_ch * oh * ow..(ni + 1) * spec.out_ch * oh * ow],
                spec.out_ch,
                oh * ow,
            ),
            MatRef::new(&cols, ckk, oh * ow).t(),
            1.0,
            &mut gw,
        );
    }
    Tensor::new(vec![spec.out_ch, spec.in_ch, k, k], gw)
}

/// Transposed convolution forward; kernel (Cin,Cout,k,k).
///
/// Realised as the input-gradient of the dual convolution that maps
/// (Cout,Ho,Wo) back to (Cin,h,w); the kernel layouts coincide.
pub fn convt2d_forward(x: &Tensor, w: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let (_, h, wd) = check_input(x, spec.in_ch, "conv_transpose2d")?;
    let (oh, ow) = spec.convt_out_hw(h, wd)?;
    let dual = dual_spec(spec);
    conv2d_backward_input(x, w, &dual, (oh, ow))
}

/// Gradient of [`convt2d_forward`] w.r.t. its input.
pub fn convt2d_backward_input(gy: &Tensor, w: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    conv2d_forward(gy, w, &dual_spec(spec))
}

/// Gradient of [`convt2d_forward`] w.r.t. the kernel.
pub fn convt2d_backward_kernel(x: &Tensor, gy: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    conv2d_backward_kernel(gy, x, &dual_spec(spec))
}

/// The convolution for which a transposed conv is the input-gradient:
/// swaps the channel roles, keeps kernel/stride/pad.
fn dual_spec(spec: &ConvSpec) -> ConvSpec {
    ConvSpec {
        in_ch: spec.out_ch,
        out_ch: spec.in_ch,
        kernel: spec.kernel,
        stride: spec.stride,
        pad: spec.pad,
    }
}
