//! End-to-end driver tests: run the real binary against temp dirs and
//! check artifacts, reproducibility and exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn genreg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_genreg"))
}

fn tmp(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("genreg_cli_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("exp.toml");
    std::fs::write(&p, text).unwrap();
    p
}

const SMOKE_CONFIG: &str = r#"
seed = 5

[data]
kind = "shapes"
image_size = 32
train_count = 40
test_count = 8

[train]
model = "ae"
epochs = 1
batch_size = 16
latent_dim = 6
base_channels = 2

[evaluate]
checkpoints = ["ae"]
encode_count = 4
emd_count = 6
projection_count = 20
encode_max_iters = 40

[reconstruct]
problem = "deconvolution"
methods = ["tikhonov", "tv"]
lambdas = [0.01, 0.1]
sigma = 0.1
image_count = 2
max_iters = 80
"#;

#[test]
fn data_subcommand_flags_and_reproducibility() {
    let dir = tmp("data");
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    for out in [&out1, &out2] {
        let status = genreg()
            .args(["data", "--kind", "shapes", "--n", "100", "--seed", "7"])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    // 100 images + manifest
    let manifest = std::fs::read_to_string(out1.join("data/train.toml")).unwrap();
    assert!(manifest.contains("count = 100"), "{manifest}");
    assert!(manifest.contains("bright_spot = false"));
    // identical files on rerun
    for f in ["data/train.grg", "data/test.grg", "data/train.toml"] {
        let a = std::fs::read(out1.join(f)).unwrap();
        let b = std::fs::read(out2.join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn shapes_plus_is_marked_in_the_manifest() {
    let dir = tmp("plus");
    let status = genreg()
        .args(["data", "--kind", "shapes-plus", "--n", "16", "--seed", "3"])
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = std::fs::read_to_string(dir.join("data/train.toml")).unwrap();
    assert!(manifest.contains("bright_spot = true"), "{manifest}");
    assert!(manifest.contains("shapes-plus"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn full_pipeline_smoke_and_artifacts() {
    let dir = tmp("pipeline");
    let cfg = write_config(&dir, SMOKE_CONFIG);
    let out = dir.join("run");
    for sub in ["data", "train", "evaluate", "reconstruct"] {
        let status = genreg()
            .arg(sub)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "{sub} failed");
    }

    // loss CSV rows = epochs
    let loss = std::fs::read_to_string(out.join("models/ae_loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 2, "header + one epoch: {loss}");

    // evaluation artifacts all present
    for f in [
        "eval/nrmse_ae.csv",
        "eval/emd.csv",
        "eval/projection_ae.csv",
        "eval/interpolation_ae.pgm",
        "eval/far_ae.pgm",
        "eval/manifest.toml",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }

    // aggregate mean in the CSV matches recomputation from the rows
    let nrmse = std::fs::read_to_string(out.join("eval/nrmse_ae.csv")).unwrap();
    let mut values = Vec::new();
    let mut mean_row = None;
    for line in nrmse.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[0] == "agg" {
            if cols[1] == "nrmse.mean" {
                mean_row = Some(cols[2].parse::<f64>().unwrap());
            }
        } else {
            values.push(cols[2].parse::<f64>().unwrap());
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let written = mean_row.expect("aggregate row present");
    assert!((mean - written).abs() <= 1e-12 * mean.abs().max(1.0));

    // metrics.csv: one row per (method, lambda, mu, image) and a
    // constant morozov column
    let metrics = std::fs::read_to_string(out.join("recon/metrics.csv")).unwrap();
    let rows: Vec<&str> = metrics.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 2 * 2, "methods x lambdas x images");
    let morozov: Vec<&str> = rows.iter().map(|r| r.split(',').nth(8).unwrap()).collect();
    assert!(morozov.windows(2).all(|w| w[0] == w[1]));

    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn checkpoint_reload_reproduces_generation_bit_exactly() {
    let dir = tmp("roundtrip");
    let cfg = write_config(&dir, SMOKE_CONFIG);
    let out = dir.join("run");
    for sub in ["data", "train"] {
        assert!(genreg()
            .arg(sub)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap()
            .success());
    }
    let models = genreg::models::load_models(&out.join("models"), "ae").unwrap();
    let z0 = genreg::tensor::Tensor::zeros(&[6]);
    let a = models.generator.generate(&z0).unwrap();
    let again = genreg::models::load_models(&out.join("models"), "ae").unwrap();
    let b = again.generator.generate(&z0).unwrap();
    let bits_a: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
    let bits_b: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
    assert_eq!(bits_a, bits_b);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn evaluate_and_reconstruct_reports_are_byte_identical_across_reruns() {
    let dir = tmp("determinism");
    let cfg = write_config(&dir, SMOKE_CONFIG);
    let (out1, out2) = (dir.join("r1"), dir.join("r2"));
    for out in [&out1, &out2] {
        for sub in ["data", "train", "evaluate", "reconstruct"] {
            assert!(genreg()
                .arg(sub)
                .arg("--config")
                .arg(&cfg)
                .arg("--out")
                .arg(out)
                .status()
                .unwrap()
                .success());
        }
    }
    for f in [
        "eval/nrmse_ae.csv",
        "eval/emd.csv",
        "eval/projection_ae.csv",
        "recon/metrics.csv",
        "models/ae_loss.csv",
    ] {
        let a = std::fs::read(out1.join(f)).unwrap();
        let b = std::fs::read(out2.join(f)).unwrap();
        assert_eq!(a, b, "{f} not byte-identical");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_errors_exit_one() {
    let dir = tmp("configerr");
    // unknown key
    let bad = write_config(&dir, "seed = 1\nbanana = 2\n");
    let status = genreg()
        .args(["data"])
        .arg("--config")
        .arg(&bad)
        .arg("--out")
        .arg(dir.join("o"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // missing section
    let empty = dir.join("empty.toml");
    std::fs::write(&empty, "seed = 1\n").unwrap();
    let status = genreg()
        .args(["train"])
        .arg("--config")
        .arg(&empty)
        .arg("--out")
        .arg(dir.join("o"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // unknown dataset kind
    let status = genreg()
        .args(["data", "--kind", "nonsense"])
        .arg("--out")
        .arg(dir.join("o"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn numerical_abort_exits_two() {
    let dir = tmp("numerr");
    let cfg = write_config(
        &dir,
        r#"
seed = 5

[data]
kind = "shapes"
image_size = 32
train_count = 24
test_count = 4

[train]
model = "vae"
epochs = 4
batch_size = 8
latent_dim = 6
base_channels = 2
lr = 1e14
"#,
    );
    let out = dir.join("run");
    assert!(genreg()
        .arg("data")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let output = genreg()
        .arg("train")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn env_variable_overrides_output_directory() {
    let dir = tmp("env");
    let env_out = dir.join("env_out");
    let status = genreg()
        .args(["data", "--kind", "shapes", "--n", "8", "--seed", "1"])
        .env("GENREG_OUT", &env_out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(env_out.join("data/train.grg").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}
