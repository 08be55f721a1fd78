//! `genreg train`: fit one model on the cached train split and write the
//! checkpoint plus a per-epoch loss CSV.

use std::path::Path;

use genreg::datasets::load_split;
use genreg::error::{Error, Result};
use genreg::eval::fmt_float;
use genreg::models::{save_models, train, ModelKind, TrainConfig};

use crate::config::TrainSection;
use crate::util::atomic_write;

pub struct TrainArgs {
    pub section: TrainSection,
    pub seed: u64,
}

pub fn run(out: &Path, args: &TrainArgs) -> Result<()> {
    let section = &args.section;
    let kind = ModelKind::parse(&section.model)?;
    let data_dir = section
        .data_dir
        .clone()
        .unwrap_or_else(|| out.join("data"));
    let (dataset, _manifest) = load_split(&data_dir, "train")?;

    let config = TrainConfig {
        epochs: section.epochs,
        batch_size: section.batch_size,
        lr: section.lr,
        seed: args.seed,
        latent_dim: section.latent_dim,
        base_channels: section.base_channels,
        leaky_alpha: section.leaky_alpha,
        rho: section.rho,
        gp_weight: section.gp_weight,
        critic_steps: section.critic_steps,
    };
    let models = train(kind, &dataset, &config)?;

    let models_dir = out.join("models");
    save_models(&models_dir, kind.as_str(), &models, &config)?;

    let mut csv = String::from("epoch,loss,aux\n");
    for s in &models.history {
        csv.push_str(&format!(
            "{},{},{}\n",
            s.epoch,
            fmt_float(s.loss),
            fmt_float(s.aux)
        ));
    }
    atomic_write(
        &models_dir.join(format!("{}_loss.csv", kind.as_str())),
        csv.as_bytes(),
    )
    .map_err(|e| match e {
        e @ Error::Io { .. } => e,
        other => other,
    })?;

    println!(
        "train: {} for {} epochs on {} images -> {}",
        kind.as_str(),
        section.epochs,
        dataset.len(),
        models_dir.display()
    );
    Ok(())
}
