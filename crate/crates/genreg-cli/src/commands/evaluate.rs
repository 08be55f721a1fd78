//! `genreg evaluate`: the generator-evaluation suite. For every named
//! checkpoint: reconstruction NRMSE over a test subset, EMD between test
//! and generated sets, 2-d latent projections, an interpolation mosaic
//! and far-from-prior samples.

use std::path::Path;

use genreg::datasets::load_split;
use genreg::error::{Error, Result};
use genreg::eval::{
    emd, encode_by_optimization, fmt_float, interpolation_grid, latent_projection_2d,
    sample_far_from_prior, MetricReport, ALPHA_GRID,
};
use genreg::io::write_pgm_mosaic;
use genreg::models::{load_models, ModelKind};
use genreg::rng::{derive_seed, rng_from_seed, standard_normal};
use genreg::solvers::Stopping;
use genreg::tensor::Tensor;

use crate::config::EvaluateSection;
use crate::util::atomic_write;

pub struct EvaluateArgs {
    pub section: EvaluateSection,
    pub seed: u64,
}

pub fn run(out: &Path, args: &EvaluateArgs) -> Result<()> {
    let section = &args.section;
    let models_dir = section
        .models_dir
        .clone()
        .unwrap_or_else(|| out.join("models"));
    let data_dir = section
        .data_dir
        .clone()
        .unwrap_or_else(|| out.join("data"));
    let eval_dir = out.join("eval");
    let (test, _) = load_split(&data_dir, "test")?;
    if test.is_empty() {
        return Err(Error::Config("empty test split".into()));
    }

    let stopping = Stopping {
        max_iters: section.encode_max_iters,
        tol: 1e-9,
    };

    let mut emd_csv = String::from("model,n,emd\n");
    for name in &section.checkpoints {
        let models = load_models(&models_dir, name)?;
        let generator = &models.generator;
        let encoder = models.encoder.as_ref();
        let latent = generator.latent_dim;

        // --- reconstruction NRMSE over the test subset
        let count = section.encode_count.min(test.len());
        let mut report = MetricReport::new(format!(
            "model={name} data={} seed={}",
            data_dir.display(),
            args.seed
        ));
        let mut encodings: Vec<Tensor> = Vec::with_capacity(count);
        for i in 0..count {
            let res = encode_by_optimization(
                &test.images[i],
                generator,
                encoder,
                section.restarts,
                derive_seed(args.seed, i as u64),
                &stopping,
            )?;
            report.push(i, "nrmse", res.nrmse);
            encodings.push(res.z);
        }
        atomic_write(
            &eval_dir.join(format!("nrmse_{name}.csv")),
            report.to_csv().as_bytes(),
        )?;

        // --- EMD between the test set and generator samples
        let n = section.emd_count.min(test.len());
        let mut rng = rng_from_seed(derive_seed(args.seed, 0xE4D));
        let mut generated = Vec::with_capacity(n);
        for _ in 0..n {
            let z = standard_normal(&[latent], &mut rng);
            generated.push(generator.generate(&z)?);
        }
        let value = emd(&test.images[..n], &generated)?;
        emd_csv.push_str(&format!("{name},{n},{}\n", fmt_float(value)));

        // --- latent projections against standard-normal references
        let mut rng = rng_from_seed(derive_seed(args.seed, 0x9807));
        let reference: Vec<Tensor> = (0..section.projection_count)
            .map(|_| standard_normal(&[latent], &mut rng))
            .collect();
        // one shared projection seed across models so axes align
        let (enc_pts, ref_pts) = latent_projection_2d(&encodings, &reference, args.seed ^ 0x2D)?;
        let mut proj_csv = String::from("kind,x,y\n");
        for p in &enc_pts {
            proj_csv.push_str(&format!("encoding,{},{}\n", fmt_float(p[0]), fmt_float(p[1])));
        }
        for p in &ref_pts {
            proj_csv.push_str(&format!("reference,{},{}\n", fmt_float(p[0]), fmt_float(p[1])));
        }
        atomic_write(&eval_dir.join(format!("projection_{name}.csv")), proj_csv.as_bytes())?;

        // --- interpolation mosaic between three test encodings
        if encodings.len() >= 3 {
            let grid = interpolation_grid(
                generator,
                &encodings[0],
                &encodings[1],
                &encodings[2],
                &ALPHA_GRID,
            )?;
            write_pgm_mosaic(&eval_dir.join(format!("interpolation_{name}.pgm")), &grid)?;
        }

        // --- far-from-prior samples
        let radius = 5.0 * (latent as f64).sqrt();
        let (_, far) = sample_far_from_prior(
            generator,
            radius,
            8,
            derive_seed(args.seed, 0xFA2),
        )?;
        write_pgm_mosaic(&eval_dir.join(format!("far_{name}.pgm")), &[far])?;

        let kind_note = match models.kind {
            ModelKind::Gan => "restarts",
            _ => "encoder-init",
        };
        println!("evaluate: {name} done ({count} reconstructions, {kind_note})");
    }
    atomic_write(&eval_dir.join("emd.csv"), emd_csv.as_bytes())?;

    let manifest = format!(
        "seed = {}\ncheckpoints = {:?}\nencode_count = {}\nemd_count = {}\nrestarts = {}\n",
        args.seed, section.checkpoints, section.encode_count, section.emd_count, section.restarts
    );
    atomic_write(&eval_dir.join("manifest.toml"), manifest.as_bytes())?;
    Ok(())
}
