use std::time::Instant;

use genreg::datasets::{generate_shapes, ShapesConfig};
use genreg::eval::psnr;
use genreg::models::{train, ModelKind, TrainConfig, TrainedModels};
use genreg::operators::{add_noise, LinearOperator, NoiseModel, RadonGeometry, RadonOp};
use genreg::rng::derive_seed;
use genreg::solvers::{self, InitPolicy, Method, SolveOptions, SolveSpec, Stopping};
use genreg::tensor::Tensor;

fn solve_one(
    op: &dyn LinearOperator,
    y: &Tensor,
    method: Method,
    models: Option<&TrainedModels>,
    lambda: f64,
    mu: f64,
    seed: u64,
    max_iters: usize,
) -> Tensor {
    let spec = SolveSpec {
        operator: op,
        data: y,
        method,
        generator: models.map(|m| &m.generator),
        encoder: None,
        init: InitPolicy::StandardNormal,
        opts: SolveOptions {
            lambda,
            mu,
            seed,
            stopping: Stopping {
                max_iters,
                tol: 1e-7,
            },
            ..SolveOptions::default()
        },
    };
    solvers::solve(&spec).unwrap().x
}

fn main() {
    let rep_seed = 1u64;
    let t_total = Instant::now();

    let train_set = generate_shapes(&ShapesConfig::new(32, 1200, derive_seed(rep_seed, 1))).unwrap();
    let tune_set = generate_shapes(&ShapesConfig::new(32, 20, derive_seed(rep_seed, 2))).unwrap();
    let test_set = generate_shapes(&ShapesConfig::new(32, 50, derive_seed(rep_seed, 3))).unwrap();

    let base_cfg = TrainConfig {
        epochs: 30,
        batch_size: 32,
        latent_dim: 10,
        base_channels: 8,
        ..TrainConfig::new(10)
    };
    let t0 = Instant::now();
    let ae = train(ModelKind::Ae, &train_set, &TrainConfig { seed: derive_seed(rep_seed, 4), ..base_cfg.clone() }).unwrap();
    let vae = train(ModelKind::Vae, &train_set, &TrainConfig { seed: derive_seed(rep_seed, 5), ..base_cfg.clone() }).unwrap();
    println!("training: {:.1}s (AE loss {:.4}, VAE loss {:.4})", t0.elapsed().as_secs_f64(),
             ae.history.last().unwrap().loss, vae.history.last().unwrap().loss);

    let op = RadonOp::new(32, RadonGeometry::default_for(32)).unwrap();
    let sigma = 0.1;
    let observe = |set: &genreg::datasets::Dataset, i: usize, tag: u64| {
        let clean = op.apply(&set.images[i]).unwrap();
        add_noise(&clean, &NoiseModel { sigma, seed: derive_seed(rep_seed, tag + i as u64) }).unwrap()
    };

    // tuning
    let lambdas = [1e-3, 1e-2, 1e-1, 1.0, 10.0];
    let mus = [1e-2, 1.0];
    let t0 = Instant::now();
    let mut best: Option<(String, f64, f64, f64)> = None;
    for (mname, models) in [("ae", &ae), ("vae", &vae)] {
        for method in [Method::Hard, Method::Relaxed, Method::Sparse] {
            let mu_grid: &[f64] = if method == Method::Hard { &[0.0] } else { &mus };
            for &lambda in &lambdas {
                for &mu in mu_grid {
                    let mut mean = 0.0;
                    for i in 0..tune_set.len() {
                        let y = observe(&tune_set, i, 0x70_000);
                        let x = solve_one(&op, &y, method, Some(models), lambda, mu, derive_seed(rep_seed, 0x50_000 + i as u64), 250);
                        mean += psnr(&x, &tune_set.images[i], 1.0).unwrap();
                    }
                    mean /= tune_set.len() as f64;
                    if best.as_ref().map(|b| mean > b.3).unwrap_or(true) {
                        best = Some((format!("{mname}-{}", method.as_str()), lambda, mu, mean));
                    }
                }
            }
        }
    }
    let best = best.unwrap();
    println!("tuning: {:.1}s; best {} lambda={} mu={} tunePSNR={:.2}", t0.elapsed().as_secs_f64(), best.0, best.1, best.2, best.3);

    // TV tuning
    let t0 = Instant::now();
    let mut tv_best = (0.0f64, f64::NEG_INFINITY);
    for &lambda in &[1e-3, 1e-2, 1e-1, 1.0, 10.0] {
        let mut mean = 0.0;
        for i in 0..tune_set.len() {
            let y = observe(&tune_set, i, 0x70_000);
            let x = solve_one(&op, &y, Method::Tv, None, lambda, 0.0, 1, 2000);
            mean += psnr(&x, &tune_set.images[i], 1.0).unwrap();
        }
        mean /= tune_set.len() as f64;
        if mean > tv_best.1 { tv_best = (lambda, mean); }
    }
    println!("tv tuning: {:.1}s; best lambda={} tunePSNR={:.2}", t0.elapsed().as_secs_f64(), tv_best.0, tv_best.1);

    // test evaluation
    let t0 = Instant::now();
    let (mname, method) = {
        let parts: Vec<&str> = best.0.split('-').collect();
        (parts[0].to_string(), Method::parse(&parts[1..].join("-")).unwrap())
    };
    let models = if mname == "ae" { &ae } else { &vae };
    let mut gen_mean = 0.0;
    let mut tv_mean = 0.0;
    for i in 0..test_set.len() {
        let y = observe(&test_set, i, 0x9000_000);
        let xg = solve_one(&op, &y, method, Some(models), best.1, best.2, derive_seed(rep_seed, 0x60_000 + i as u64), 400);
        gen_mean += psnr(&xg, &test_set.images[i], 1.0).unwrap();
        let xt = solve_one(&op, &y, Method::Tv, None, tv_best.0, 0.0, 1, 2000);
        tv_mean += psnr(&xt, &test_set.images[i], 1.0).unwrap();
    }
    gen_mean /= test_set.len() as f64;
    tv_mean /= test_set.len() as f64;
    println!("test: {:.1}s; {} mean PSNR {:.2} vs TV {:.2} (gap {:+.2} dB)", t0.elapsed().as_secs_f64(), best.0, gen_mean, tv_mean, gen_mean - tv_mean);
    println!("total: {:.1}s", t_total.elapsed().as_secs_f64());
}
