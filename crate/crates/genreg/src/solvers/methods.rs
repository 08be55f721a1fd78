//! The reconstruction methods: hard (range-restricted), relaxed, sparse,
//! sparse-TV and projected gradient descent over a trained generator,
//! plus the Tikhonov and TV baselines. One [`SolveSpec`] describes an
//! instance; [`solve`] dispatches.
//!
//! Data fidelity is the unscaled `||Ax - y||^2` throughout.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::models::{EncoderModel, GeneratorModel};
use crate::operators::LinearOperator;
use crate::rng::{rng_from_seed, standard_normal};
use crate::solvers::backtrack::{
    alt_gd_backtracking, gd_backtracking, palm_backtracking, BacktrackConfig, ProxTerm, RunTrace,
    SmoothObjective, SmoothObjective2, Stopping,
};
use crate::solvers::pdhg::{pdhg_tv, tv_prox, tv_value, PdhgOptions};
use crate::solvers::prox::{L1Term, SqNormTerm};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Hard,
    Relaxed,
    Sparse,
    SparseTv,
    Pgd,
    Tikhonov,
    Tv,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Hard => "hard",
            Method::Relaxed => "relaxed",
            Method::Sparse => "sparse",
            Method::SparseTv => "sparse-tv",
            Method::Pgd => "pgd",
            Method::Tikhonov => "tikhonov",
            Method::Tv => "tv",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "hard" => Method::Hard,
            "relaxed" => Method::Relaxed,
            "sparse" => Method::Sparse,
            "sparse-tv" => Method::SparseTv,
            "pgd" => Method::Pgd,
            "tikhonov" => Method::Tikhonov,
            "tv" => Method::Tv,
            other => return Err(Error::Config(format!("unknown method '{other}'"))),
        })
    }

    pub fn needs_generator(&self) -> bool {
        matches!(
            self,
            Method::Hard | Method::Relaxed | Method::Sparse | Method::SparseTv | Method::Pgd
        )
    }
}

/// How the latent iterate starts.
#[derive(Debug, Clone)]
pub enum InitPolicy {
    /// z0 ~ N(0, I) from the run seed; restart k reseeds with seed + k.
    StandardNormal,
    /// Initialise at the encoder output of a crude adjoint estimate.
    Encoder,
    /// A fixed starting latent.
    Given(Tensor),
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub lambda: f64,
    pub mu: f64,
    pub restarts: usize,
    pub seed: u64,
    pub stopping: Stopping,
    pub backtrack: BacktrackConfig,
    /// PGD data step; `None` derives 1/||A||^2 by power iteration.
    pub pgd_step: Option<f64>,
    /// Inner PDHG budget for the sparse-TV deviation prox.
    pub tv_prox_iters: usize,
    pub pdhg: PdhgOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            lambda: 1e-2,
            mu: 1e-2,
            restarts: 1,
            seed: 0,
            stopping: Stopping::default(),
            backtrack: BacktrackConfig::default(),
            pgd_step: None,
            tv_prox_iters: 100,
            pdhg: PdhgOptions::default(),
        }
    }
}

pub struct SolveSpec<'a> {
    pub operator: &'a dyn LinearOperator,
    pub data: &'a Tensor,
    pub method: Method,
    pub generator: Option<&'a GeneratorModel>,
    pub encoder: Option<&'a EncoderModel>,
    pub init: InitPolicy,
    pub opts: SolveOptions,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// The reported reconstruction (for relaxed: the image block).
    pub x: Tensor,
    pub z: Option<Tensor>,
    /// G(z*) where a generator is involved.
    pub generator_part: Option<Tensor>,
    /// Deviation from the generator range: u* for sparse/sparse-TV,
    /// x* - G(z*) for relaxed.
    pub deviation: Option<Tensor>,
    /// Objective values at accepted outer iterates (methods built on the
    /// descent algorithms); squared discrepancy per iterate for PGD.
    pub objective_trace: Vec<f64>,
    /// Final data discrepancy ||A x - y||_2.
    pub discrepancy: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: f64,
    /// Winning restart (argmin of final objectives, lowest index on ties).
    pub restart_index: usize,
    /// PDHG residual for the TV baseline.
    pub gap: Option<f64>,
    /// False only when TV stopped at its budget above tolerance.
    pub gap_converged: bool,
}

impl SolveResult {
    fn from_trace(x: Tensor, trace: &RunTrace, restart_index: usize) -> Self {
        SolveResult {
            x,
            z: None,
            generator_part: None,
            deviation: None,
            objective_trace: trace.objective.clone(),
            discrepancy: 0.0,
            accepted_steps: trace.accepted_steps,
            rejected_steps: trace.rejected_steps,
            iterations: trace.objective.len().saturating_sub(1),
            converged: trace.converged,
            wall_ms: 0.0,
            restart_index,
            gap: None,
            gap_converged: true,
        }
    }
}

fn validate(spec: &SolveSpec) -> Result<()> {
    if spec.method.needs_generator() && spec.generator.is_none() {
        return Err(Error::InvalidArgument(format!(
            "method '{}' requires a generator",
            spec.method.as_str()
        )));
    }
    if !spec.method.needs_generator() && spec.generator.is_some() {
        return Err(Error::InvalidArgument(format!(
            "method '{}' does not take a generator",
            spec.method.as_str()
        )));
    }
    let needs_lambda = !matches!(spec.method, Method::Pgd);
    if needs_lambda && spec.opts.lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "method '{}' needs lambda > 0, got {}",
            spec.method.as_str(),
            spec.opts.lambda
        )));
    }
    if spec.data.shape() != spec.operator.out_shape() {
        return Err(Error::shape(
            "solve data",
            spec.operator.out_shape(),
            spec.data.shape(),
        ));
    }
    Ok(())
}

/// Latent initialisation for restart `k`; the seed convention is
/// `base_seed + k`.
fn init_latent(spec: &SolveSpec, restart: usize) -> Result<Tensor> {
    let generator = spec.generator.expect("validated");
    match &spec.init {
        InitPolicy::Given(z0) => {
            if z0.shape() != [generator.latent_dim] {
                return Err(Error::shape(
                    "given init",
                    &[generator.latent_dim],
                    z0.shape(),
                ));
            }
            Ok(z0.clone())
        }
        InitPolicy::StandardNormal => {
            let mut rng = rng_from_seed(spec.opts.seed.wrapping_add(restart as u64));
            Ok(standard_normal(&[generator.latent_dim], &mut rng))
        }
        InitPolicy::Encoder => {
            let encoder = spec.encoder.ok_or_else(|| {
                Error::InvalidArgument("encoder-init requires an encoder".to_string())
            })?;
            // crude in-range estimate: adjoint image rescaled into [0,1]
            let back = spec.operator.adjoint(spec.data)?;
            let norm = spec.operator.norm_estimate(30, spec.opts.seed)?;
            let scaled = back.scale(1.0 / (norm * norm).max(1e-12));
            let clamped = scaled.map(|v| v.clamp(0.0, 1.0));
            encoder.encode(&clamped)
        }
    }
}

/// Unscaled data fidelity `||A x - y||^2` and its gradient `2 A^T r`.
struct DataFit<'a> {
    op: &'a dyn LinearOperator,
    y: &'a Tensor,
}

impl DataFit<'_> {
    fn residual(&self, x: &Tensor) -> Result<Tensor> {
        self.op.apply(x)?.sub(self.y)
    }

    fn value(&self, x: &Tensor) -> Result<f64> {
        Ok(self.residual(x)?.sqnorm())
    }

    fn grad(&self, x: &Tensor) -> Result<(f64, Tensor)> {
        let r = self.residual(x)?;
        Ok((r.sqnorm(), self.op.adjoint(&r)?.scale(2.0)))
    }
}

// ---------------------------------------------------------------------
// hard: min_z ||A G(z) - y||^2 + lambda ||z||^2           (Algorithm 1)
// ---------------------------------------------------------------------

struct HardObjective<'a> {
    fit: DataFit<'a>,
    lambda: f64,
    generator: &'a GeneratorModel,
}

impl SmoothObjective for HardObjective<'_> {
    fn value(&mut self, z: &Tensor) -> Result<f64> {
        let x = self.generator.generate(z)?;
        Ok(self.fit.value(&x)? + self.lambda * z.sqnorm())
    }

    fn value_grad(&mut self, z: &Tensor) -> Result<(f64, Tensor)> {
        let eval = self.generator.eval_for_vjp(z)?;
        let x = eval.image()?;
        let r = self.fit.residual(&x)?;
        let seed = self.fit.op.adjoint(&r)?.scale(2.0);
        let gz = eval.vjp(&seed)?.axpy(2.0 * self.lambda, z)?;
        Ok((r.sqnorm() + self.lambda * z.sqnorm(), gz))
    }
}

fn solve_hard(spec: &SolveSpec) -> Result<SolveResult> {
    let generator = spec.generator.expect("validated");
    let mut best: Option<SolveResult> = None;
    for restart in 0..spec.opts.restarts.max(1) {
        let z0 = init_latent(spec, restart)?;
        let mut obj = HardObjective {
            fit: DataFit {
                op: spec.operator,
                y: spec.data,
            },
            lambda: spec.opts.lambda,
            generator,
        };
        let (z, trace) = gd_backtracking(&mut obj, z0, &spec.opts.backtrack, &spec.opts.stopping)?;
        // the range property: x* is exactly generate(z*)
        let x = generator.generate(&z)?;
        let mut result = SolveResult::from_trace(x.clone(), &trace, restart);
        result.z = Some(z);
        result.generator_part = Some(x);
        if best
            .as_ref()
            .map(|b| trace.final_objective() < b.objective_trace.last().copied().unwrap_or(f64::INFINITY))
            .unwrap_or(true)
        {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

// ---------------------------------------------------------------------
// relaxed: min_{z,x} ||Ax-y||^2 + lambda(||G(z)-x||^2 + mu ||z||^2)
//                                                         (Algorithm 2)
// ---------------------------------------------------------------------

struct RelaxedObjective<'a> {
    fit: DataFit<'a>,
    lambda: f64,
    mu: f64,
    generator: &'a GeneratorModel,
}

impl SmoothObjective2 for RelaxedObjective<'_> {
    fn value(&mut self, z: &Tensor, x: &Tensor) -> Result<f64> {
        let gz = self.generator.generate(z)?;
        Ok(self.fit.value(x)?
            + self.lambda * (gz.sub(x)?.sqnorm() + self.mu * z.sqnorm()))
    }

    fn value_grad_z(&mut self, z: &Tensor, x: &Tensor) -> Result<(f64, Tensor)> {
        let eval = self.generator.eval_for_vjp(z)?;
        let gz = eval.image()?;
        let diff = gz.sub(x)?;
        let seed = diff.scale(2.0 * self.lambda);
        let grad = eval.vjp(&seed)?.axpy(2.0 * self.lambda * self.mu, z)?;
        let value =
            self.fit.value(x)? + self.lambda * (diff.sqnorm() + self.mu * z.sqnorm());
        Ok((value, grad))
    }

    fn value_grad_x(&mut self, z: &Tensor, x: &Tensor) -> Result<(f64, Tensor)> {
        let gz = self.generator.generate(z)?;
        let diff = gz.sub(x)?;
        let (fit_val, fit_grad) = self.fit.grad(x)?;
        let grad = fit_grad.axpy(-2.0 * self.lambda, &diff)?;
        Ok((
            fit_val + self.lambda * (diff.sqnorm() + self.mu * z.sqnorm()),
            grad,
        ))
    }
}

fn solve_relaxed(spec: &SolveSpec) -> Result<SolveResult> {
    let generator = spec.generator.expect("validated");
    let in_shape = spec.operator.in_shape().to_vec();
    let mut best: Option<SolveResult> = None;
    for restart in 0..spec.opts.restarts.max(1) {
        let z0 = init_latent(spec, restart)?;
        // image block starts from the same standard-normal convention
        let mut rng = rng_from_seed(spec.opts.seed.wrapping_add(restart as u64) ^ 0x5158);
        let x0 = standard_normal(&in_shape, &mut rng);
        let mut obj = RelaxedObjective {
            fit: DataFit {
                op: spec.operator,
                y: spec.data,
            },
            lambda: spec.opts.lambda,
            mu: spec.opts.mu,
            generator,
        };
        let (z, x, trace) =
            alt_gd_backtracking(&mut obj, z0, x0, &spec.opts.backtrack, &spec.opts.stopping)?;
        let gz = generator.generate(&z)?;
        let mut result = SolveResult::from_trace(x.clone(), &trace, restart);
        result.deviation = Some(x.sub(&gz)?);
        result.generator_part = Some(gz);
        result.z = Some(z);
        if best
            .as_ref()
            .map(|b| trace.final_objective() < b.objective_trace.last().copied().unwrap_or(f64::INFINITY))
            .unwrap_or(true)
        {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

// ---------------------------------------------------------------------
// sparse / sparse-tv: min_{z,u} ||A(G(z)+u)-y||^2
//                       + lambda (F(u) + mu ||z||^2)      (Algorithm 3)
// with F the 1-norm (sparse) or the TV seminorm (sparse-tv)
// ---------------------------------------------------------------------

struct SplitObjective<'a> {
    fit: DataFit<'a>,
    generator: &'a GeneratorModel,
}

impl SmoothObjective2 for SplitObjective<'_> {
    fn value(&mut self, z: &Tensor, u: &Tensor) -> Result<f64> {
        let x = self.generator.generate(z)?.add(u)?;
        self.fit.value(&x)
    }

    fn value_grad_z(&mut self, z: &Tensor, u: &Tensor) -> Result<(f64, Tensor)> {
        let eval = self.generator.eval_for_vjp(z)?;
        let x = eval.image()?.add(u)?;
        let r = self.fit.residual(&x)?;
        let seed = self.fit.op.adjoint(&r)?.scale(2.0);
        Ok((r.sqnorm(), eval.vjp(&seed)?))
    }

    fn value_grad_x(&mut self, z: &Tensor, u: &Tensor) -> Result<(f64, Tensor)> {
        let x = self.generator.generate(z)?.add(u)?;
        let r = self.fit.residual(&x)?;
        Ok((r.sqnorm(), self.fit.op.adjoint(&r)?.scale(2.0)))
    }
}

/// TV deviation term with the inexact inner-PDHG prox.
struct TvTerm {
    weight: f64,
    inner_iters: usize,
}

impl ProxTerm for TvTerm {
    fn value(&self, v: &Tensor) -> f64 {
        self.weight * tv_value(v)
    }

    fn prox(&self, v: &Tensor, tau: f64) -> Tensor {
        tv_prox(v, tau * self.weight, self.inner_iters).expect("tv prox on matching shapes")
    }
}

fn solve_split(spec: &SolveSpec, tv: bool) -> Result<SolveResult> {
    let generator = spec.generator.expect("validated");
    let in_shape = spec.operator.in_shape().to_vec();
    let lambda = spec.opts.lambda;
    let g1 = SqNormTerm {
        weight: lambda * spec.opts.mu,
    };
    let mut best: Option<SolveResult> = None;
    for restart in 0..spec.opts.restarts.max(1) {
        let z0 = init_latent(spec, restart)?;
        let u0 = Tensor::zeros(&in_shape);
        let mut obj = SplitObjective {
            fit: DataFit {
                op: spec.operator,
                y: spec.data,
            },
            generator,
        };
        let (z, u, trace) = if tv {
            let g2 = TvTerm {
                weight: lambda,
                inner_iters: spec.opts.tv_prox_iters,
            };
            palm_backtracking(&mut obj, &g1, &g2, z0, u0, &spec.opts.backtrack, &spec.opts.stopping)?
        } else {
            let g2 = L1Term { weight: lambda };
            palm_backtracking(&mut obj, &g1, &g2, z0, u0, &spec.opts.backtrack, &spec.opts.stopping)?
        };
        let gz = generator.generate(&z)?;
        let x = gz.add(&u)?;
        let mut result = SolveResult::from_trace(x, &trace, restart);
        result.generator_part = Some(gz);
        result.deviation = Some(u);
        result.z = Some(z);
        if best
            .as_ref()
            .map(|b| trace.final_objective() < b.objective_trace.last().copied().unwrap_or(f64::INFINITY))
            .unwrap_or(true)
        {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

// ---------------------------------------------------------------------
// pgd: data step w = x - eta A^T(Ax - y), then project onto the
// generator range by Algorithm 1 on ||w - G(z)||^2
// ---------------------------------------------------------------------

struct ProjectionObjective<'a> {
    target: &'a Tensor,
    generator: &'a GeneratorModel,
}

impl SmoothObjective for ProjectionObjective<'_> {
    fn value(&mut self, z: &Tensor) -> Result<f64> {
        Ok(self.generator.generate(z)?.sub(self.target)?.sqnorm())
    }

    fn value_grad(&mut self, z: &Tensor) -> Result<(f64, Tensor)> {
        let eval = self.generator.eval_for_vjp(z)?;
        let diff = eval.image()?.sub(self.target)?;
        Ok((diff.sqnorm(), eval.vjp(&diff.scale(2.0))?))
    }
}

fn solve_pgd(spec: &SolveSpec) -> Result<SolveResult> {
    let generator = spec.generator.expect("validated");
    let fit = DataFit {
        op: spec.operator,
        y: spec.data,
    };
    let eta = match spec.opts.pgd_step {
        Some(e) => e,
        None => {
            let norm = spec.operator.norm_estimate(50, spec.opts.seed ^ 0xE7A)?;
            1.0 / (norm * norm).max(1e-12)
        }
    };
    // the latent projection runs on a tighter budget than the outer loop
    let inner_stop = Stopping {
        max_iters: 200,
        tol: spec.opts.stopping.tol.max(1e-10),
    };

    let mut best: Option<SolveResult> = None;
    for restart in 0..spec.opts.restarts.max(1) {
        let mut z = init_latent(spec, restart)?;
        let mut x = generator.generate(&z)?;
        let mut trace = RunTrace {
            objective: vec![fit.value(&x)?],
            ..RunTrace::default()
        };
        for _ in 0..spec.opts.stopping.max_iters {
            let (_, grad) = fit.grad(&x)?;
            let w = x.axpy(-eta, &grad)?;
            let mut proj = ProjectionObjective {
                target: &w,
                generator,
            };
            let (z_new, inner) =
                gd_backtracking(&mut proj, z.clone(), &spec.opts.backtrack, &inner_stop)?;
            trace.accepted_steps += inner.accepted_steps;
            trace.rejected_steps += inner.rejected_steps;
            let x_new = generator.generate(&z_new)?;
            let change = x_new.sub(&x)?.norm() / x.norm().max(1e-12);
            z = z_new;
            x = x_new;
            trace.objective.push(fit.value(&x)?);
            if change < spec.opts.stopping.tol {
                trace.converged = true;
                break;
            }
        }
        let final_disc = *trace.objective.last().expect("non-empty");
        let mut result = SolveResult::from_trace(x.clone(), &trace, restart);
        result.generator_part = Some(x);
        result.z = Some(z);
        if best
            .as_ref()
            .map(|b| final_disc < b.objective_trace.last().copied().unwrap_or(f64::INFINITY))
            .unwrap_or(true)
        {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

// ---------------------------------------------------------------------
// tikhonov: min_x ||Ax - y||^2 + lambda ||x||^2           (Algorithm 1)
// ---------------------------------------------------------------------

struct TikhonovObjective<'a> {
    fit: DataFit<'a>,
    lambda: f64,
}

impl SmoothObjective for TikhonovObjective<'_> {
    fn value(&mut self, x: &Tensor) -> Result<f64> {
        Ok(self.fit.value(x)? + self.lambda * x.sqnorm())
    }

    fn value_grad(&mut self, x: &Tensor) -> Result<(f64, Tensor)> {
        let (v, g) = self.fit.grad(x)?;
        Ok((v + self.lambda * x.sqnorm(), g.axpy(2.0 * self.lambda, x)?))
    }
}

fn solve_tikhonov(spec: &SolveSpec) -> Result<SolveResult> {
    let mut rng = rng_from_seed(spec.opts.seed);
    let x0 = standard_normal(spec.operator.in_shape(), &mut rng);
    let mut obj = TikhonovObjective {
        fit: DataFit {
            op: spec.operator,
            y: spec.data,
        },
        lambda: spec.opts.lambda,
    };
    let (x, trace) = gd_backtracking(&mut obj, x0, &spec.opts.backtrack, &spec.opts.stopping)?;
    Ok(SolveResult::from_trace(x, &trace, 0))
}

fn solve_tv(spec: &SolveSpec) -> Result<SolveResult> {
    let res = pdhg_tv(spec.operator, spec.data, spec.opts.lambda, &spec.opts.pdhg)?;
    Ok(SolveResult {
        x: res.x,
        z: None,
        generator_part: None,
        deviation: None,
        objective_trace: vec![res.objective],
        discrepancy: 0.0,
        accepted_steps: res.iterations,
        rejected_steps: 0,
        iterations: res.iterations,
        converged: res.gap_converged,
        wall_ms: 0.0,
        restart_index: 0,
        gap: Some(res.gap),
        gap_converged: res.gap_converged,
    })
}

/// Solve one inverse-problem instance.
pub fn solve(spec: &SolveSpec) -> Result<SolveResult> {
    validate(spec)?;
    let start = Instant::now();
    let mut result = match spec.method {
        Method::Hard => solve_hard(spec)?,
        Method::Relaxed => solve_relaxed(spec)?,
        Method::Sparse => solve_split(spec, false)?,
        Method::SparseTv => solve_split(spec, true)?,
        Method::Pgd => solve_pgd(spec)?,
        Method::Tikhonov => solve_tikhonov(spec)?,
        Method::Tv => solve_tv(spec)?,
    };
    result.discrepancy = spec
        .operator
        .apply(&result.x)?
        .sub(spec.data)?
        .norm();
    result.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(result)
}
