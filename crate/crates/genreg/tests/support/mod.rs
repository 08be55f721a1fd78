//! Shared helpers for the integration and acceptance suites.

use std::collections::BTreeMap;

use genreg::autodiff::{Bindings, Mode, Network, ParamSet, Tape};
use genreg::rng::{rng_from_seed, SeededRng};
use genreg::tensor::Tensor;

/// Central finite difference of a scalar function at `x`, step `h`.
pub fn finite_diff(mut f: impl FnMut(&Tensor) -> f64, x: &Tensor, h: f64) -> Tensor {
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.numel() {
        let mut xp = x.clone();
        xp.data_mut()[i] += h;
        let mut xm = x.clone();
        xm.data_mut()[i] -= h;
        grad.data_mut()[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    grad
}

/// max_i |a_i - b_i| / max(||b||_inf, 1e-6)
pub fn rel_err(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape(), "rel_err shape mismatch");
    let scale = b
        .data()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-6);
    a.data()
        .iter()
        .zip(b.data())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Scalar loss used by the gradient checks: ||net(x) - target||^2.
///
/// Dropout layers are exercised in train mode with an rng reseeded per
/// evaluation, so every finite-difference probe sees the same mask.
pub struct NetLoss {
    pub net: Network,
    pub target: Tensor,
    pub mode: Mode,
    pub rng_seed: u64,
}

impl NetLoss {
    pub fn value(&self, params: &ParamSet, input: &Tensor) -> f64 {
        let mut tape = Tape::new();
        let bindings = Bindings::bind(&mut tape, params);
        let x = tape.leaf(input.clone());
        let mut rng = rng_from_seed(self.rng_seed);
        let out = self
            .net
            .forward(&mut tape, &bindings, x, self.mode, Some(&mut rng))
            .expect("forward");
        let t = tape.constant(self.target.clone());
        let d = tape.sub(out, t).expect("sub");
        let loss = tape.sqnorm(d).expect("sqnorm");
        tape.value(loss).item()
    }

    /// Backward gradients for every parameter and the input.
    pub fn grads(&self, params: &ParamSet, input: &Tensor) -> (BTreeMap<String, Tensor>, Tensor) {
        let mut tape = Tape::new();
        let bindings = Bindings::bind(&mut tape, params);
        let x = tape.leaf(input.clone().with_grad());
        let mut rng = rng_from_seed(self.rng_seed);
        let out = self
            .net
            .forward(&mut tape, &bindings, x, self.mode, Some(&mut rng))
            .expect("forward");
        let t = tape.constant(self.target.clone());
        let d = tape.sub(out, t).expect("sub");
        let loss = tape.sqnorm(d).expect("sqnorm");
        let gm = tape.backward(loss).expect("backward");
        (bindings.gradients(&tape, &gm), gm.grad_or_zeros(&tape, x))
    }
}

/// Check backward gradients of a network against central finite
/// differences for one seed; returns the worst relative error seen.
pub fn gradcheck_network(net: Network, input_batch: usize, seed: u64, mode: Mode) -> f64 {
    let mut rng = rng_from_seed(seed);
    let params = net.init_params(&mut rng).expect("init");
    let mut in_shape = vec![input_batch];
    in_shape.extend_from_slice(&net.input_shape);
    let input = genreg::rng::standard_normal(&in_shape, &mut rng);
    let mut out_shape = vec![input_batch];
    out_shape.extend_from_slice(&net.output_shape().expect("shape"));
    let target = genreg::rng::standard_normal(&out_shape, &mut rng);

    let loss = NetLoss {
        net,
        target,
        mode,
        rng_seed: seed ^ 0xD00D,
    };
    let (param_grads, input_grad) = loss.grads(&params, &input);

    let h = 1e-5;
    let mut worst = 0.0f64;

    // input gradient
    let fd_input = finite_diff(|x| loss.value(&params, x), &input, h);
    worst = worst.max(rel_err(&input_grad, &fd_input));

    // every parameter tensor
    for name in params.names().map(str::to_string).collect::<Vec<_>>() {
        let base = params.get(&name).unwrap().clone();
        let fd = finite_diff(
            |p| {
                let mut perturbed = params.clone();
                perturbed.set(&name, p.clone()).unwrap();
                loss.value(&perturbed, &input)
            },
            &base,
            h,
        );
        worst = worst.max(rel_err(&param_grads[&name], &fd));
    }
    worst
}

pub fn seeded(seed: u64) -> SeededRng {
    rng_from_seed(seed)
}

/// Dense matrix of a linear operator, built column-by-column from basis
/// vectors. Row-major (m, n).
pub fn densify(op: &dyn genreg::operators::LinearOperator) -> (Vec<f64>, usize, usize) {
    let n: usize = op.in_shape().iter().product();
    let m: usize = op.out_shape().iter().product();
    let mut mat = vec![0.0; m * n];
    for j in 0..n {
        let mut e = Tensor::zeros(op.in_shape());
        e.data_mut()[j] = 1.0;
        let col = op.apply(&e).expect("densify apply");
        for i in 0..m {
            mat[i * n + j] = col.data()[i];
        }
    }
    (mat, m, n)
}

/// Solve a dense linear system by Gaussian elimination with partial
/// pivoting. `a` is row-major (n, n), consumed.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    for col in 0..n {
        // pivot
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        assert!(d.abs() > 1e-14, "singular system at column {col}");
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    // back substitution
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    x
}

/// Normal-equations Tikhonov oracle: solve (A^T A + lambda I) x = A^T y.
pub fn tikhonov_dense(
    op: &dyn genreg::operators::LinearOperator,
    y: &Tensor,
    lambda: f64,
) -> Tensor {
    let (a, m, n) = densify(op);
    // gram = A^T A + lambda I
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for r in 0..m {
                acc += a[r * n + i] * a[r * n + j];
            }
            gram[i * n + j] = acc;
        }
        gram[i * n + i] += lambda;
    }
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        for r in 0..m {
            rhs[i] += a[r * n + i] * y.data()[r];
        }
    }
    let x = solve_dense(gram, rhs);
    Tensor::new(op.in_shape().to_vec(), x).unwrap()
}
