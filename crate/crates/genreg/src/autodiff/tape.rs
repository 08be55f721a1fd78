//! Reverse-mode automatic differentiation over a fixed tensor op set.
//!
//! A [`Tape`] records every operation as a node holding its forward value;
//! [`Tape::backward`] walks the nodes in reverse, accumulating
//! vector-Jacobian products. The op set is exactly what the networks and
//! solvers in this crate need; this is not a general-purpose engine.
//!
//! Tapes are single-owner and single-threaded. Gradients only flow into
//! leaves created from tensors with `requires_grad` set.

use crate::autodiff::conv::{
    conv2d_backward_input, conv2d_backward_kernel, conv2d_forward, convt2d_backward_input,
    convt2d_backward_kernel, convt2d_forward, ConvSpec,
};
use crate::autodiff::gemm::{gemm, MatRef};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Constant,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    HadamardConst(Var, Tensor),
    Exp(Var),
    Ln(Var),
    Sqrt(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    MatMul {
        a: Var,
        b: Var,
        ta: bool,
        tb: bool,
    },
    AddRowBias(Var, Var),
    AddChannelBias(Var, Var),
    Conv2d {
        input: Var,
        kernel: Var,
        spec: ConvSpec,
    },
    ConvT2d {
        input: Var,
        kernel: Var,
        spec: ConvSpec,
    },
    Reshape(Var),
    SumAll(Var),
    MeanAll(Var),
    SumPerSample(Var),
}

struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn req(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Enter a tensor; gradients flow back to it iff `requires_grad` is set.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let rg = t.requires_grad();
        self.push(Op::Leaf, t, rg)
    }

    /// Enter a tensor that never receives gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Constant, t, false)
    }

    /// Copy of a node's value re-entered as a gradient-stopping constant.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.nodes[v.0].value.clone();
        self.constant(t)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.req(v)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), v, self.req(a) || self.req(b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), v, self.req(a) || self.req(b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).mul(self.value(b))?;
        Ok(self.push(Op::Mul(a, b), v, self.req(a) || self.req(b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).scale(s);
        self.push(Op::Scale(a, s), v, self.req(a))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| x + s);
        self.push(Op::AddScalar(a), v, self.req(a))
    }

    /// Elementwise product with a constant tensor (dropout masks,
    /// activation masks, interpolation weights).
    pub fn hadamard_const(&mut self, a: Var, c: Tensor) -> Result<Var> {
        let v = self.value(a).mul(&c)?;
        let rg = self.req(a);
        Ok(self.push(Op::HadamardConst(a, c), v, rg))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), v, self.req(a))
    }

    /// Natural log; rejects nonpositive entries up front.
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        if self.value(a).data().iter().any(|&x| x <= 0.0) {
            return Err(Error::Numerical(
                "ln of nonpositive tensor entry".to_string(),
            ));
        }
        let v = self.value(a).map(f64::ln);
        Ok(self.push(Op::Ln(a), v, self.req(a)))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::sqrt);
        self.push(Op::Sqrt(a), v, self.req(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(Op::Sigmoid(a), v, self.req(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), v, self.req(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), v, self.req(a))
    }

    pub fn leaky_relu(&mut self, a: Var, alpha: f64) -> Var {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { alpha * x });
        self.push(Op::LeakyRelu(a, alpha), v, self.req(a))
    }

    /// Matrix product of 2-d tensors with optional logical transposes.
    pub fn matmul(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape().len() != 2 || bv.shape().len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "matmul needs 2-d tensors, got {:?} and {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let ar = mat_ref(av, ta);
        let br = mat_ref(bv, tb);
        if ar.cols() != br.rows() {
            return Err(Error::InvalidArgument(format!(
                "matmul inner dims: {:?}{} x {:?}{}",
                av.shape(),
                if ta { "^T" } else { "" },
                bv.shape(),
                if tb { "^T" } else { "" }
            )));
        }
        let (m, n) = (ar.rows(), br.cols());
        let mut out = vec![0.0; m * n];
        gemm(1.0, ar, br, 0.0, &mut out);
        let rg = self.req(a) || self.req(b);
        Ok(self.push(Op::MatMul { a, b, ta, tb }, Tensor::new(vec![m, n], out)?, rg))
    }

    /// (N,D) + (D,) broadcast over rows.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(bias));
        if av.shape().len() != 2 || bv.shape() != [av.shape()[1]] {
            return Err(Error::InvalidArgument(format!(
                "row bias: input {:?}, bias {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let (n, d) = (av.shape()[0], av.shape()[1]);
        let mut out = av.data().to_vec();
        for row in 0..n {
            for j in 0..d {
                out[row * d + j] += bv.data()[j];
            }
        }
        let rg = self.req(a) || self.req(bias);
        Ok(self.push(
            Op::AddRowBias(a, bias),
            Tensor::new(vec![n, d], out)?,
            rg,
        ))
    }

    /// (N,C,H,W) + (C,) broadcast over batch and space.
    pub fn add_channel_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(bias));
        if av.shape().len() != 4 || bv.shape() != [av.shape()[1]] {
            return Err(Error::InvalidArgument(format!(
                "channel bias: input {:?}, bias {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let (n, c, h, w) = (av.shape()[0], av.shape()[1], av.shape()[2], av.shape()[3]);
        let hw = h * w;
        let mut out = av.data().to_vec();
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * hw;
                let b = bv.data()[ci];
                for k in 0..hw {
                    out[base + k] += b;
                }
            }
        }
        let rg = self.req(a) || self.req(bias);
        let shape = av.shape().to_vec();
        Ok(self.push(Op::AddChannelBias(a, bias), Tensor::new(shape, out)?, rg))
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, spec: ConvSpec) -> Result<Var> {
        let v = conv2d_forward(self.value(input), self.value(kernel), &spec)?;
        let rg = self.req(input) || self.req(kernel);
        Ok(self.push(
            Op::Conv2d {
                input,
                kernel,
                spec,
            },
            v,
            rg,
        ))
    }

    pub fn conv_transpose2d(&mut self, input: Var, kernel: Var, spec: ConvSpec) -> Result<Var> {
        let v = convt2d_forward(self.value(input), self.value(kernel), &spec)?;
        let rg = self.req(input) || self.req(kernel);
        Ok(self.push(
            Op::ConvT2d {
                input,
                kernel,
                spec,
            },
            v,
            rg,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(a).reshape(shape)?;
        let rg = self.req(a);
        Ok(self.push(Op::Reshape(a), v, rg))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(Op::SumAll(a), v, self.req(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).numel().max(1) as f64;
        let v = Tensor::scalar(self.value(a).sum() / n);
        self.push(Op::MeanAll(a), v, self.req(a))
    }

    /// Reduce all but the leading (batch) axis: (N, ...) -> (N,).
    pub fn sum_per_sample(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.shape().is_empty() {
            return Err(Error::InvalidArgument(
                "sum_per_sample needs a batch axis".to_string(),
            ));
        }
        let n = av.shape()[0];
        let per = av.numel() / n.max(1);
        let mut out = vec![0.0; n];
        for (i, chunk) in av.data().chunks_exact(per).enumerate() {
            out[i] = chunk.iter().sum();
        }
        let rg = self.req(a);
        Ok(self.push(Op::SumPerSample(a), Tensor::new(vec![n], out)?, rg))
    }

    /// Sum of squared entries as a scalar node.
    pub fn sqnorm(&mut self, a: Var) -> Result<Var> {
        let sq = self.mul(a, a)?;
        Ok(self.sum_all(sq))
    }

    /// Gradients of a scalar loss with respect to every reachable
    /// `requires_grad` leaf.
    pub fn backward(&self, loss: Var) -> Result<GradMap> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        if !lv.item().is_finite() {
            return Err(Error::Numerical(format!(
                "backward on non-finite loss {}",
                lv.item()
            )));
        }
        let seed = Tensor::new(lv.shape().to_vec(), vec![1.0])?;
        self.backward_seeded(loss, &seed)
    }

    /// Vector-Jacobian products from an arbitrary output node, seeded with
    /// `seed` (the cotangent of `output`). Used by solvers that chain an
    /// off-tape linear operator onto a generator output.
    pub fn backward_seeded(&self, output: Var, seed: &Tensor) -> Result<GradMap> {
        if seed.shape() != self.value(output).shape() {
            return Err(Error::shape(
                "backward seed",
                self.value(output).shape(),
                seed.shape(),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed.clone());

        for idx in (0..=output.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.accumulate(idx, &g, &mut grads)?;
            // keep the gradient available for callers
            grads[idx] = Some(g);
        }
        Ok(GradMap { grads })
    }

    fn accum(&self, grads: &mut [Option<Tensor>], v: Var, delta: Tensor) -> Result<()> {
        if !self.req(v) {
            return Ok(());
        }
        match &mut grads[v.0] {
            Some(existing) => {
                *existing = existing.add(&delta)?;
            }
            slot @ None => *slot = Some(delta),
        }
        Ok(())
    }

    fn accumulate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::Add(a, b) => {
                self.accum(grads, *a, g.clone())?;
                self.accum(grads, *b, g.clone())?;
            }
            Op::Sub(a, b) => {
                self.accum(grads, *a, g.clone())?;
                self.accum(grads, *b, g.scale(-1.0))?;
            }
            Op::Mul(a, b) => {
                self.accum(grads, *a, g.mul(self.value(*b))?)?;
                self.accum(grads, *b, g.mul(self.value(*a))?)?;
            }
            Op::Scale(a, s) => self.accum(grads, *a, g.scale(*s))?,
            Op::AddScalar(a) => self.accum(grads, *a, g.clone())?,
            Op::HadamardConst(a, c) => self.accum(grads, *a, g.mul(c)?)?,
            Op::Exp(a) => self.accum(grads, *a, g.mul(&node.value)?)?,
            Op::Ln(a) => {
                let inv = self.value(*a).map(|x| 1.0 / x);
                self.accum(grads, *a, g.mul(&inv)?)?;
            }
            Op::Sqrt(a) => {
                let d = node.value.map(|y| 0.5 / y);
                self.accum(grads, *a, g.mul(&d)?)?;
            }
            Op::Sigmoid(a) => {
                let d = node.value.map(|s| s * (1.0 - s));
                self.accum(grads, *a, g.mul(&d)?)?;
            }
            Op::Tanh(a) => {
                let d = node.value.map(|t| 1.0 - t * t);
                self.accum(grads, *a, g.mul(&d)?)?;
            }
            Op::Relu(a) => {
                let mask = self.value(*a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                self.accum(grads, *a, g.mul(&mask)?)?;
            }
            Op::LeakyRelu(a, alpha) => {
                let alpha = *alpha;
                let mask = self.value(*a).map(|x| if x > 0.0 { 1.0 } else { alpha });
                self.accum(grads, *a, g.mul(&mask)?)?;
            }
            Op::MatMul { a, b, ta, tb } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let gref = mat_ref(g, false);
                if self.req(*a) {
                    let mut ga = vec![0.0; av.numel()];
                    if !*ta {
                        // gA = g . B'^T
                        gemm(1.0, gref, mat_ref(bv, !*tb), 0.0, &mut ga);
                    } else {
                        // stored gA = B' . g^T
                        gemm(1.0, mat_ref(bv, *tb), gref.t(), 0.0, &mut ga);
                    }
                    self.accum(grads, *a, Tensor::new(av.shape().to_vec(), ga)?)?;
                }
                if self.req(*b) {
                    let mut gb = vec![0.0; bv.numel()];
                    if !*tb {
                        // gB = A'^T . g
                        gemm(1.0, mat_ref(av, !*ta), gref, 0.0, &mut gb);
                    } else {
                        // stored gB = g^T . A'
                        gemm(1.0, gref.t(), mat_ref(av, *ta), 0.0, &mut gb);
                    }
                    self.accum(grads, *b, Tensor::new(bv.shape().to_vec(), gb)?)?;
                }
            }
            Op::AddRowBias(a, bias) => {
                self.accum(grads, *a, g.clone())?;
                if self.req(*bias) {
                    let d = self.value(*bias).numel();
                    let mut gb = vec![0.0; d];
                    for row in g.data().chunks_exact(d) {
                        for (acc, v) in gb.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    self.accum(grads, *bias, Tensor::new(vec![d], gb)?)?;
                }
            }
            Op::AddChannelBias(a, bias) => {
                self.accum(grads, *a, g.clone())?;
                if self.req(*bias) {
                    let shape = g.shape();
                    let (n, c, hw) = (shape[0], shape[1], shape[2] * shape[3]);
                    let mut gb = vec![0.0; c];
                    for ni in 0..n {
                        for ci in 0..c {
                            let base = (ni * c + ci) * hw;
                            gb[ci] += g.data()[base..base + hw].iter().sum::<f64>();
                        }
                    }
                    self.accum(grads, *bias, Tensor::new(vec![c], gb)?)?;
                }
            }
            Op::Conv2d {
                input,
                kernel,
                spec,
            } => {
                if self.req(*input) {
                    let iv = self.value(*input);
                    let hw = (iv.shape()[2], iv.shape()[3]);
                    let gi = conv2d_backward_input(g, self.value(*kernel), spec, hw)?;
                    self.accum(grads, *input, gi)?;
                }
                if self.req(*kernel) {
                    let gk = conv2d_backward_kernel(self.value(*input), g, spec)?;
                    self.accum(grads, *kernel, gk)?;
                }
            }
            Op::ConvT2d {
                input,
                kernel,
                spec,
            } => {
                if self.req(*input) {
                    let gi = convt2d_backward_input(g, self.value(*kernel), spec)?;
                    self.accum(grads, *input, gi)?;
                }
                if self.req(*kernel) {
                    let gk = convt2d_backward_kernel(self.value(*input), g, spec)?;
                    self.accum(grads, *kernel, gk)?;
                }
            }
            Op::Reshape(a) => {
                let back = g.reshape(self.value(*a).shape())?;
                self.accum(grads, *a, back)?;
            }
            Op::SumAll(a) => {
                let s = g.item();
                self.accum(grads, *a, Tensor::filled(self.value(*a).shape(), s))?;
            }
            Op::MeanAll(a) => {
                let n = self.value(*a).numel().max(1) as f64;
                let s = g.item() / n;
                self.accum(grads, *a, Tensor::filled(self.value(*a).shape(), s))?;
            }
            Op::SumPerSample(a) => {
                let av = self.value(*a);
                let n = av.shape()[0];
                let per = av.numel() / n.max(1);
                let mut out = vec![0.0; av.numel()];
                for i in 0..n {
                    let gi = g.data()[i];
                    for v in &mut out[i * per..(i + 1) * per] {
                        *v = gi;
                    }
                }
                self.accum(grads, *a, Tensor::new(av.shape().to_vec(), out)?)?;
            }
        }
        Ok(())
    }
}

fn mat_ref(t: &Tensor, trans: bool) -> MatRef<'_> {
    let m = MatRef::new(t.data(), t.shape()[0], t.shape()[1]);
    if trans {
        m.t()
    } else {
        m
    }
}

/// Per-node gradients produced by one backward pass.
pub struct GradMap {
    grads: Vec<Option<Tensor>>,
}

impl GradMap {
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient for a leaf; zeros if the leaf never reached the loss.
    pub fn grad_or_zeros(&self, tape: &Tape, v: Var) -> Tensor {
        match self.grad(v) {
            Some(g) => g.clone(),
            None => Tensor::zeros(tape.value(v).shape()),
        }
    }
}
