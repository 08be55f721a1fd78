//! Behavioural tests for the reconstruction methods on planted
//! instances, using small fixed-weight generators (no training needed).

mod support;

use genreg::models::{ArchConfig, GeneratorModel, ModelKind};
use genreg::operators::{
    add_noise, gaussian_kernel, ConvOp, IdentityOp, NoiseModel, RadonGeometry, RadonOp,
};
use genreg::operators::LinearOperator;
use genreg::rng::{rng_from_seed, standard_normal};
use genreg::solvers::{
    self, grad2d, tv_value, InitPolicy, Method, SolveOptions, SolveSpec, Stopping,
};
use genreg::tensor::Tensor;
use genreg::autodiff::{Layer, Network, ParamSet};

fn small_generator(seed: u64) -> GeneratorModel {
    let cfg = ArchConfig {
        image_size: 16,
        latent_dim: 6,
        base_channels: 4,
        leaky_alpha: 0.2,
    };
    let net = cfg.generator_net().unwrap();
    let params = net.init_params(&mut rng_from_seed(seed)).unwrap();
    GeneratorModel {
        net,
        params,
        latent_dim: 6,
        kind: ModelKind::Vae,
        arch: cfg,
    }
}

fn blur_op() -> ConvOp {
    ConvOp::new(gaussian_kernel(5, 1.0).unwrap(), (16, 16)).unwrap()
}

fn opts(lambda: f64, mu: f64, seed: u64) -> SolveOptions {
    SolveOptions {
        lambda,
        mu,
        seed,
        stopping: Stopping {
            max_iters: 600,
            tol: 1e-9,
        },
        ..SolveOptions::default()
    }
}

#[test]
fn hard_planted_init_starts_at_penalty_and_stays() {
    // noiseless in-range data with the true latent as init: the data term
    // vanishes, so the trace starts at lambda ||z0||^2 and the tiny
    // penalty gradient cannot move the iterate noticeably
    let generator = small_generator(1);
    let op = blur_op();
    let z0 = standard_normal(&[6], &mut rng_from_seed(2));
    let x0 = generator.generate(&z0).unwrap();
    let y = op.apply(&x0).unwrap();
    let lambda = 1e-12;
    let spec = SolveSpec {
        operator: &op,
        data: &y,
        method: Method::Hard,
        generator: Some(&generator),
        encoder: None,
        init: InitPolicy::Given(z0.clone()),
        opts: opts(lambda, 0.0, 1),
    };
    let res = solvers::solve(&spec).unwrap();
    let expect0 = lambda * z0.sqnorm();
    let got0 = res.objective_trace[0];
    assert!(
        (got0 - expect0).abs() <= 1e-9 * expect0.max(1e-12),
        "trace[0] = {got0}, expected {expect0}"
    );
    let drift = res.x.sub(&x0).unwrap().norm() / x0.norm();
    assert!(drift <= 1e-6, "x drifted by {drift}");
}

#[test]
fn hard_result_is_bit_exactly_in_the_generator_range() {
    let generator = small_generator(3);
    let op = blur_op();
    let y = op
        .apply(&generator.generate(&standard_normal(&[6], &mut rng_from_seed(4))).unwrap())
        .unwrap();
    let spec = SolveSpec {
        operator: &op,
        data: &y,
        method: Method::Hard,
        generator: Some(&generator),
        encoder: None,
        init: InitPolicy::StandardNormal,
        opts: opts(1e-3, 0.0, 9),
    };
    let res = solvers::solve(&spec).unwrap();
    let z = res.z.as_ref().unwrap();
    let regenerated = generator.generate(z).unwrap();
    assert_eq!(res.x.data(), regenerated.data(), "x* must equal G(z*) bit-exactly");
    assert!(res.objective_trace.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn hard_latent_norm_shrinks_as_lambda_grows() {
    let generator = small_generator(5);
    let op = blur_op();
    let y = op
        .apply(&generator.generate(&standard_normal(&[6], &mut rng_from_seed(6))).unwrap())
        .unwrap();
    let mut last = f64::INFINITY;
    for lambda in [1e-4, 1e-2, 1.0, 100.0] {
        let spec = SolveSpec {
            operator: &op,
            data: &y,
            method: Method::Hard,
            generator: Some(&generator),
            encoder: None,
            init: InitPolicy::StandardNormal,
            opts: opts(lambda, 0.0, 11),
        };
        let res = solvers::solve(&spec).unwrap();
        let zn = res.z.unwrap().norm();
        assert!(zn <= last + 1e-9, "lambda {lambda}: ||z|| {zn} > {last}");
        last = zn;
    }
}

#[test]
fn sparse_planted_optimum_keeps_deviation_zero() {
    let generator = small_generator(7);
    let op = blur_op();
    let z0 = standard_normal(&[6], &mut rng_from_seed(8));
    let y = op.apply(&generator.generate(&z0).unwrap()).unwrap();
    let (lambda, mu) = (1e-6, 1e-6);
    let spec = SolveSpec {
        operator: &op,
        data: &y,
        method: Method::Sparse,
        generator: Some(&generator),
        encoder: None,
        init: InitPolicy::Given(z0.clone()),
        opts: opts(lambda, mu, 13),
    };
    let res = solvers::solve(&spec).unwrap();
    let u = res.deviation.unwrap();
    assert_eq!(u.norm(), 0.0, "u* must stay exactly zero");
    let expect0 = lambda * mu * z0.sqnorm();
    assert!(
        (res.objective_trace[0] - expect0).abs() <= 1e-9 * expect0.max(1e-15),
        "trace[0] = {}, expected {expect0}",
        res.objective_trace[0]
    );
    assert!(res.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-15));
}

#[test]
fn sparse_support_shrinks_along_the_lambda_grid() {
    let generator = small_generator(15);
    let op = blur_op();
    let z0 = standard_normal(&[6], &mut rng_from_seed(16));
    let clean = op.apply(&generator.generate(&z0).unwrap()).unwrap();
    let y = add_noise(&clean, &NoiseModel { sigma: 0.05, seed: 17 }).unwrap();
    let mut last_support = usize::MAX;
    for lambda in [1e-4, 1e-2, 1.0] {
        let spec = SolveSpec {
            operator: &op,
            data: &y,
            method: Method::Sparse,
            generator: Some(&generator),
            encoder: None,
            init: InitPolicy::StandardNormal,
            opts: opts(lambda, 1e-3, 19),
        };
        let res = solvers::solve(&spec).unwrap();
        let support = res
            .deviation
            .unwrap()
            .data()
            .iter()
            .filter(|v| v.abs() > 1e-12)
            .count();
        assert!(
            support <= last_support,
            "lambda {lambda}: support {support} grew past {last_support}"
        );
        last_support = support;
    }
}

#[test]
fn relaxed_tends_to_range_for_large_lambda_and_monotone_trace() {
    let generator = small_generator(21);
    let op = blur_op();
    let z0 = standard_normal(&[6], &mut rng_from_seed(22));
    let y = op.apply(&generator.generate(&z0).unwrap()).unwrap();
    let spec = SolveSpec {
        operator: &op,
        data: &y,
        method: Method::Relaxed,
        generator: Some(&generator),
        encoder: None,
        init: InitPolicy::StandardNormal,
        opts: SolveOptions {
            stopping: Stopping {
                max_iters: 1_500,
                tol: 1e-10,
            },
            ..opts(100.0, 1e-4, 23)
        },
    };
    let res = solvers::solve(&spec).unwrap();
    assert!(res.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let gz = res.generator_part.unwrap();
    let gap = res.x.sub(&gz).unwrap().norm() / res.x.norm();
    assert!(gap <= 0.05, "x strays from the range by {gap}");
}

#[test]
fn relaxed_with_zero_generator_reduces_to_tikhonov() {
    // a generator pinned at (numerically) zero output turns the relaxed
    // objective into ||Ax-y||^2 + lambda ||x||^2
    let n_px = 16 * 16;
    let mut params = ParamSet::new();
    params.insert("dead.w", Tensor::zeros(&[n_px, 2])).unwrap();
    params
        .insert("dead.b", Tensor::filled(&[n_px], -60.0))
        .unwrap();
    let dead_generator = GeneratorModel {
        net: Network::new(
            vec![2],
            vec![
                Layer::Dense {
                    name: "dead".into(),
                    in_dim: 2,
                    out_dim: n_px,
                },
                Layer::Sigmoid,
                Layer::Reshape {
                    shape: vec![1, 16, 16],
                },
            ],
        ),
        params,
        latent_dim: 2,
        kind: ModelKind::Ae,
        arch: ArchConfig {
            image_size: 16,
            latent_dim: 2,
            base_channels: 1,
            leaky_alpha: 0.2,
        },
    };
    let op = blur_op();
    let truth = genreg::rng::uniform(&[16, 16], 0.0, 1.0, &mut rng_from_seed(31));
    let y = op.apply(&truth).unwrap();
    let lambda = 0.2;
    let spec = SolveSpec {
        operator: &op,
        data: &y,
        method: Method::Relaxed,
        generator: Some(&dead_generator),
        encoder: None,
        init: InitPolicy::StandardNormal,
        opts: SolveOptions {
            stopping: Stopping {
                max_iters: 6_000,
                tol: 1e-11,
            },
            ..opts(lambda, 0.0, 33)
        },
    };
    let res = solvers::solve(&spec).unwrap();
    let oracle = support::tikhonov_dense(&op, &y, lambda);
    let err = res.x.sub(&oracle).unwrap().norm() / oracle.norm();
    assert!(err <= 1e-5, "relaxed-with-dead-generator vs Tikhonov: {err}");
}

#[test]
fn pgd_in_range_consistent_data_is_a_fixed_point() {
    let generator = small_generator(41);
    let op = IdentityOp::new(&[16, 16]);
    let z0 = standard_normal(&[6], &mut rng_from_seed(42));
    let x0 = generator.generate(&z0).unwrap();
    let y = op.apply(&x0).unwrap();
    let spec = SolveSpec {
        operator: &op,
        data: &y,
        method: Method::Pgd,
        generator: Some(&generator),
        encoder: None,
        init: InitPolicy::Given(z0),
        opts: SolveOptions {
            pgd_step: Some(0.5),
            ..opts(1.0, 0.0, 43)
        },
    };
    let res = solvers::solve(&spec).unwrap();
    let drift = res.x.sub(&x0).unwrap().norm() / x0.norm();
    assert!(drift <= 1e-9, "fixed point drifted by {drift}");
}

#[test]
fn pgd_discrepancy_never_increases_with_conservative_step() {
    let generator = small_generator(45);
    let op = RadonOp::new(16, RadonGeometry::default_for(16)).unwrap();
    let target = generator
        .generate(&standard_normal(&[6], &mut rng_from_seed(46)))
        .unwrap();
    let y = op.apply(&target).unwrap();
    let norm = op.norm_estimate(60, 47).unwrap();
    let spec = SolveSpec {
        operator: &op,
        data: &y,
        method: Method::Pgd,
        generator: Some(&generator),
        encoder: None,
        init: InitPolicy::StandardNormal,
        opts: SolveOptions {
            pgd_step: Some(1.0 / (norm * norm)),
            stopping: Stopping {
                max_iters: 60,
                tol: 1e-10,
            },
            ..opts(1.0, 0.0, 48)
        },
    };
    let res = solvers::solve(&spec).unwrap();
    // discrepancy trace: allow a vanishing tolerance for the inexact
    // inner projection
    for w in res.objective_trace.windows(2) {
        assert!(
            w[1] <= w[0] * (1.0 + 1e-6) + 1e-12,
            "discrepancy rose: {} -> {}",
            w[0],
            w[1]
        );
    }
}

#[test]
fn sparse_tv_large_lambda_flattens_the_deviation() {
    // along a lambda sweep the deviation's TV collapses towards the
    // seminorm null space (the prox is inexact with a fixed inner
    // budget, so "flat" means orders of magnitude, not exactly zero)
    let generator = small_generator(51);
    let op = blur_op();
    let z0 = standard_normal(&[6], &mut rng_from_seed(52));
    let clean = op.apply(&generator.generate(&z0).unwrap()).unwrap();
    let y = add_noise(&clean, &NoiseModel { sigma: 0.05, seed: 53 }).unwrap();
    let solve_at = |lambda: f64| {
        let spec = SolveSpec {
            operator: &op,
            data: &y,
            method: Method::SparseTv,
            generator: Some(&generator),
            encoder: None,
            init: InitPolicy::StandardNormal,
            opts: SolveOptions {
                stopping: Stopping {
                    max_iters: 300,
                    tol: 1e-9,
                },
                tv_prox_iters: 400,
                ..opts(lambda, 1e-4, 54)
            },
        };
        let res = solvers::solve(&spec).unwrap();
        let u = res.deviation.unwrap();
        let (dx, dy) = grad2d(&u);
        (tv_value(&u), dx.norm() + dy.norm())
    };
    let (tv_small, _) = solve_at(1e-4);
    let (tv_large, grad_mass_large) = solve_at(50.0);
    assert!(
        tv_large <= 0.02 * tv_small,
        "deviation TV {tv_large} vs small-lambda {tv_small}"
    );
    assert!(grad_mass_large <= 0.05, "gradient mass {grad_mass_large}");
}

#[test]
fn restarts_are_deterministic_and_pick_the_best_objective() {
    let generator = small_generator(61);
    let op = blur_op();
    let y = op
        .apply(&generator.generate(&standard_normal(&[6], &mut rng_from_seed(62))).unwrap())
        .unwrap();
    let run = || {
        let spec = SolveSpec {
            operator: &op,
            data: &y,
            method: Method::Hard,
            generator: Some(&generator),
            encoder: None,
            init: InitPolicy::StandardNormal,
            opts: SolveOptions {
                restarts: 4,
                ..opts(1e-3, 0.0, 70)
            },
        };
        solvers::solve(&spec).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.restart_index, b.restart_index);
    let bits_a: Vec<u64> = a.x.data().iter().map(|v| v.to_bits()).collect();
    let bits_b: Vec<u64> = b.x.data().iter().map(|v| v.to_bits()).collect();
    assert_eq!(bits_a, bits_b);

    // the winner must not lose to any single-restart run
    for k in 0..4u64 {
        let spec = SolveSpec {
            operator: &op,
            data: &y,
            method: Method::Hard,
            generator: Some(&generator),
            encoder: None,
            init: InitPolicy::StandardNormal,
            opts: SolveOptions {
                restarts: 1,
                ..opts(1e-3, 0.0, 70 + k)
            },
        };
        let single = solvers::solve(&spec).unwrap();
        assert!(
            a.objective_trace.last().unwrap() <= single.objective_trace.last().unwrap(),
            "restart {k} beat the best-of-4"
        );
    }
}

#[test]
fn method_validation_errors() {
    let op = blur_op();
    let y = Tensor::zeros(&[16, 16]);
    // generator required
    let spec = SolveSpec {
        operator: &op,
        data: &y,
        method: Method::Hard,
        generator: None,
        encoder: None,
        init: InitPolicy::StandardNormal,
        opts: SolveOptions::default(),
    };
    assert!(solvers::solve(&spec).is_err());
    // lambda must be positive for regularised methods
    let generator = small_generator(71);
    let spec = SolveSpec {
        operator: &op,
        data: &y,
        method: Method::Hard,
        generator: Some(&generator),
        encoder: None,
        init: InitPolicy::StandardNormal,
        opts: SolveOptions {
            lambda: 0.0,
            ..SolveOptions::default()
        },
    };
    assert!(solvers::solve(&spec).is_err());
}
