use std::time::Instant;

use genreg::datasets::{generate_shapes, ShapesConfig};
use genreg::models::{train, ModelKind, TrainConfig};
use genreg::operators::{RadonGeometry, RadonOp, LinearOperator};
use genreg::rng::{rng_from_seed, standard_normal};
use genreg::solvers::{self, InitPolicy, Method, SolveOptions, SolveSpec, Stopping};

fn main() {
    let t0 = Instant::now();
    let ds = generate_shapes(&ShapesConfig::new(32, 1000, 1)).unwrap();
    println!("dataset 1000 imgs: {:.2}s", t0.elapsed().as_secs_f64());

    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 32,
        latent_dim: 10,
        base_channels: 8,
        seed: 7,
        ..TrainConfig::new(10)
    };
    let t0 = Instant::now();
    let vae = train(ModelKind::Vae, &ds, &cfg).unwrap();
    let per_epoch = t0.elapsed().as_secs_f64() / 3.0;
    println!("VAE: {:.2}s/epoch ({} params)", per_epoch, vae.generator.params.numel());

    let t0 = Instant::now();
    let _ae = train(ModelKind::Ae, &ds, &TrainConfig { epochs: 1, ..cfg.clone() }).unwrap();
    println!("AE: {:.2}s/epoch", t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let _gan = train(ModelKind::Gan, &ds, &TrainConfig { epochs: 1, ..cfg.clone() }).unwrap();
    println!("GAN: {:.2}s/epoch", t0.elapsed().as_secs_f64());

    // solve timing: hard method on tomography
    let op = RadonOp::new(32, RadonGeometry::default_for(32)).unwrap();
    let z0 = standard_normal(&[10], &mut rng_from_seed(3));
    let x_true = vae.generator.generate(&z0).unwrap();
    let y = op.apply(&x_true).unwrap();
    for (name, method, iters) in [
        ("hard", Method::Hard, 400),
        ("relaxed", Method::Relaxed, 400),
        ("sparse", Method::Sparse, 400),
        ("sparse-tv", Method::SparseTv, 200),
    ] {
        let t0 = Instant::now();
        let spec = SolveSpec {
            operator: &op,
            data: &y,
            method,
            generator: Some(&vae.generator),
            encoder: None,
            init: InitPolicy::StandardNormal,
            opts: SolveOptions {
                lambda: 0.01,
                mu: 0.01,
                seed: 5,
                stopping: Stopping { max_iters: iters, tol: 1e-8 },
                ..SolveOptions::default()
            },
        };
        let res = solvers::solve(&spec).unwrap();
        println!(
            "{name}: {:.2}s ({} accepted, {} rejected, converged={})",
            t0.elapsed().as_secs_f64(),
            res.accepted_steps,
            res.rejected_steps,
            res.converged
        );
    }

    let t0 = Instant::now();
    let spec = SolveSpec {
        operator: &op,
        data: &y,
        method: Method::Tv,
        generator: None,
        encoder: None,
        init: InitPolicy::StandardNormal,
        opts: SolveOptions { lambda: 0.05, ..SolveOptions::default() },
    };
    let res = solvers::solve(&spec).unwrap();
    println!("tv: {:.2}s ({} iters)", t0.elapsed().as_secs_f64(), res.iterations);
}
