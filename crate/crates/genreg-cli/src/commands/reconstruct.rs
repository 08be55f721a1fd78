//! `genreg reconstruct`: run reconstruction sweeps over (method, lambda,
//! mu, image) tuples and emit plot-ready CSV tables.
//!
//! Deterministic columns (PSNR, NRMSE, discrepancy, iterations, the
//! Morozov target) go to `metrics.csv`; wall-clock timings are kept out
//! of the reproducible outputs in a sibling `timings.csv` with the same
//! row keys.

use std::path::Path;

use genreg::datasets::load_split;
use genreg::error::{Error, Result};
use genreg::eval::{fmt_float, nrmse, psnr};
use genreg::io::write_pgm;
use genreg::models::{load_models, TrainedModels};
use genreg::operators::{
    add_noise, gaussian_kernel, gaussian_sensing, morozov_target, ConvOp, LinearOperator,
    NoiseModel, RadonGeometry, RadonOp,
};
use genreg::rng::derive_seed;
use genreg::solvers::{self, InitPolicy, Method, SolveOptions, SolveSpec, Stopping};
use genreg::tensor::Tensor;
use rayon::prelude::*;

use crate::config::ReconstructSection;
use crate::util::atomic_write;

pub struct ReconstructArgs {
    pub section: ReconstructSection,
    pub seed: u64,
    pub jobs: usize,
}

fn build_operator(
    section: &ReconstructSection,
    image_size: usize,
    seed: u64,
) -> Result<Box<dyn LinearOperator>> {
    match section.problem.as_str() {
        "deconvolution" => Ok(Box::new(ConvOp::new(
            gaussian_kernel(5, 1.0)?,
            (image_size, image_size),
        )?)),
        "compressed-sensing" => Ok(Box::new(gaussian_sensing(
            section.measurements,
            (image_size, image_size),
            derive_seed(seed, 0xA11),
        ))),
        "tomography" => Ok(Box::new(RadonOp::new(
            image_size,
            RadonGeometry::default_for(image_size),
        )?)),
        other => Err(Error::Config(format!(
            "unknown problem '{other}' (expected deconvolution, compressed-sensing or tomography)"
        ))),
    }
}

struct Job {
    method: Method,
    lambda: f64,
    mu: f64,
    image_index: usize,
    row_seed: u64,
}

struct RowOutcome {
    psnr: f64,
    nrmse: f64,
    discrepancy: f64,
    iterations: usize,
    wall_ms: f64,
    x: Tensor,
    trace: Vec<f64>,
}

pub fn run(out: &Path, args: &ReconstructArgs) -> Result<()> {
    let section = &args.section;
    let recon_dir = out.join("recon");
    let data_dir = section
        .data_dir
        .clone()
        .unwrap_or_else(|| out.join("data"));
    let (test, _) = load_split(&data_dir, "test")?;
    let n_images = section.image_count.min(test.len());
    if n_images == 0 {
        return Err(Error::Config("no test images to reconstruct".into()));
    }
    let image_size = test.image_shape()[0];

    let methods: Vec<Method> = section
        .methods
        .iter()
        .map(|m| Method::parse(m))
        .collect::<Result<_>>()?;
    let needs_generator = methods.iter().any(Method::needs_generator);
    let models: Option<TrainedModels> = if needs_generator {
        let name = section.model.as_ref().ok_or_else(|| {
            Error::Config("generative methods need reconstruct.model = \"<checkpoint>\"".into())
        })?;
        let models_dir = section
            .models_dir
            .clone()
            .unwrap_or_else(|| out.join("models"));
        Some(load_models(&models_dir, name)?)
    } else {
        None
    };

    let operator = build_operator(section, image_size, args.seed)?;
    let m: usize = operator.out_shape().iter().product();
    let morozov = morozov_target(
        &NoiseModel {
            sigma: section.sigma,
            seed: 0,
        },
        m,
    );

    // observed data per image, noise seeded per image index
    let observations: Vec<Tensor> = (0..n_images)
        .map(|i| {
            let clean = operator.apply(&test.images[i])?;
            add_noise(
                &clean,
                &NoiseModel {
                    sigma: section.sigma,
                    seed: derive_seed(args.seed, 0xB0_0000 + i as u64),
                },
            )
        })
        .collect::<Result<_>>()?;

    // job list in deterministic CSV order
    let mut jobs = Vec::new();
    for method in &methods {
        let mus: &[f64] = match method {
            Method::Relaxed | Method::Sparse | Method::SparseTv => &section.mus,
            _ => &[0.0],
        };
        let lambdas: Vec<f64> = match method {
            Method::Pgd => vec![0.0],
            _ => section.lambdas.clone(),
        };
        for &lambda in &lambdas {
            for &mu in mus {
                for image_index in 0..n_images {
                    let row_seed = derive_seed(args.seed, jobs.len() as u64);
                    jobs.push(Job {
                        method: *method,
                        lambda,
                        mu,
                        image_index,
                        row_seed,
                    });
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let generator = models.as_ref().map(|m| &m.generator);
    let encoder = models.as_ref().and_then(|m| m.encoder.as_ref());
    let outcomes: Vec<Result<RowOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| -> Result<RowOutcome> {
                let y = &observations[job.image_index];
                let truth = &test.images[job.image_index];
                let spec = SolveSpec {
                    operator: operator.as_ref(),
                    data: y,
                    method: job.method,
                    generator: if job.method.needs_generator() {
                        generator
                    } else {
                        None
                    },
                    encoder,
                    init: InitPolicy::StandardNormal,
                    opts: SolveOptions {
                        lambda: job.lambda,
                        mu: job.mu,
                        restarts: section.restarts,
                        seed: job.row_seed,
                        stopping: Stopping {
                            max_iters: section.max_iters,
                            tol: section.tol,
                        },
                        ..SolveOptions::default()
                    },
                };
                let res = solvers::solve(&spec)?;
                Ok(RowOutcome {
                    psnr: psnr(&res.x, truth, 1.0)?,
                    nrmse: nrmse(&res.x, truth)?,
                    discrepancy: res.discrepancy,
                    iterations: res.iterations,
                    wall_ms: res.wall_ms,
                    x: res.x,
                    trace: res.objective_trace,
                })
            })
            .collect()
    });

    let mut metrics =
        String::from("method,lambda,mu,image,seed,psnr,nrmse,discrepancy,morozov,iterations\n");
    let mut timings = String::from("method,lambda,mu,image,seed,wall_ms\n");
    for (job, outcome) in jobs.iter().zip(outcomes) {
        let o = outcome?;
        let key = format!(
            "{},{},{},{},{}",
            job.method.as_str(),
            fmt_float(job.lambda),
            fmt_float(job.mu),
            job.image_index,
            job.row_seed
        );
        metrics.push_str(&format!(
            "{key},{},{},{},{},{}\n",
            fmt_float(o.psnr),
            fmt_float(o.nrmse),
            fmt_float(o.discrepancy),
            fmt_float(morozov),
            o.iterations
        ));
        timings.push_str(&format!("{key},{}\n", fmt_float(o.wall_ms)));

        if section.traces {
            let mut tcsv = String::from("iteration,objective\n");
            for (k, v) in o.trace.iter().enumerate() {
                tcsv.push_str(&format!("{k},{}\n", fmt_float(*v)));
            }
            let name = format!(
                "trace_{}_{}_{}_{:03}.csv",
                job.method.as_str(),
                fmt_float(job.lambda),
                fmt_float(job.mu),
                job.image_index
            );
            atomic_write(&recon_dir.join("traces").join(name), tcsv.as_bytes())?;
        }
        if section.images {
            let name = format!(
                "recon_{}_{}_{}_{:03}",
                job.method.as_str(),
                fmt_float(job.lambda),
                fmt_float(job.mu),
                job.image_index
            );
            let img_dir = recon_dir.join("images");
            write_pgm(&img_dir.join(format!("{name}.pgm")), &o.x)?;
            let mut tensors = std::collections::BTreeMap::new();
            tensors.insert("x".to_string(), o.x.clone());
            genreg::autodiff::checkpoint::write_tensors(
                &img_dir.join(format!("{name}.grg")),
                &tensors,
            )?;
        }
    }
    if section.images {
        let img_dir = recon_dir.join("images");
        for i in 0..n_images {
            write_pgm(&img_dir.join(format!("truth_{i:03}.pgm")), &test.images[i])?;
        }
    }

    atomic_write(&recon_dir.join("metrics.csv"), metrics.as_bytes())?;
    atomic_write(&recon_dir.join("timings.csv"), timings.as_bytes())?;

    let manifest = format!(
        "seed = {}\nproblem = \"{}\"\nsigma = {}\nmorozov = {}\nimages = {}\nmethods = {:?}\n\
         lambdas = {:?}\nmus = {:?}\nrestarts = {}\nmax_iters = {}\ntol = {}\n",
        args.seed,
        section.problem,
        fmt_float(section.sigma),
        fmt_float(morozov),
        n_images,
        section.methods,
        section.lambdas,
        section.mus,
        section.restarts,
        section.max_iters,
        fmt_float(section.tol),
    );
    atomic_write(&recon_dir.join("manifest.toml"), manifest.as_bytes())?;

    println!(
        "reconstruct: {} rows over {} images -> {}",
        jobs.len(),
        n_images,
        recon_dir.display()
    );
    Ok(())
}
