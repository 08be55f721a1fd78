//! `genreg data`: synthesise or import datasets into the split cache.

use std::path::Path;

use genreg::datasets::{generate_shapes, load_mnist, save_split, Dataset, ShapesConfig};
use genreg::error::{Error, Result};
use genreg::rng::derive_seed;

use crate::config::DataSection;

pub struct DataArgs {
    pub section: DataSection,
    pub seed: u64,
}

fn shapes_split(
    section: &DataSection,
    split: &str,
    count: usize,
    seed: u64,
    bright: bool,
) -> Result<Dataset> {
    let mut cfg = ShapesConfig::new(section.image_size, count, seed);
    if let Some(range) = section.intensity {
        cfg.intensity = range;
    }
    if bright {
        cfg = cfg.with_bright_spot();
    }
    let mut ds = generate_shapes(&cfg)?;
    ds.split = split.to_string();
    Ok(ds)
}

pub fn run(out: &Path, args: &DataArgs) -> Result<()> {
    let section = &args.section;
    let data_dir = out.join("data");
    let echo = toml::to_string(section).map_err(|e| Error::Config(e.to_string()))?;
    let echo = format!(
        "seed = {}\nbright_spot = {}\n{echo}",
        args.seed,
        section.kind == "shapes-plus"
    );

    let (train, test) = match section.kind.as_str() {
        "shapes" | "shapes-plus" => {
            let bright = section.kind == "shapes-plus";
            let train = shapes_split(
                section,
                "train",
                section.train_count,
                derive_seed(args.seed, 1),
                bright,
            )?;
            let test = shapes_split(
                section,
                "test",
                section.test_count,
                derive_seed(args.seed, 2),
                bright,
            )?;
            (train, test)
        }
        "mnist" => {
            let dir = section.mnist_dir.as_ref().ok_or_else(|| {
                Error::Config("mnist kind needs data.mnist_dir pointing at the IDX files".into())
            })?;
            let (full_train, full_test) = load_mnist(dir)?;
            (
                full_train.take(section.train_count.min(full_train.len())),
                full_test.take(section.test_count.min(full_test.len())),
            )
        }
        other => {
            return Err(Error::Config(format!(
                "unknown dataset kind '{other}' (expected shapes, shapes-plus or mnist)"
            )))
        }
    };

    save_split(&data_dir, "train", &train, &echo)?;
    save_split(&data_dir, "test", &test, &echo)?;
    println!(
        "data: wrote {} train / {} test {} images to {}",
        train.len(),
        test.len(),
        section.kind,
        data_dir.display()
    );
    Ok(())
}
