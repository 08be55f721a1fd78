//! Experiment configuration: one TOML file with per-subcommand sections.
//! Unknown keys are rejected everywhere so sweeps stay auditable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed for every stage; subcommands derive their streams.
    pub seed: Option<u64>,
    /// Output directory; overridden by --out or GENREG_OUT.
    pub out: Option<PathBuf>,
    /// Parallel solve jobs; overridden by --jobs or GENREG_JOBS.
    pub jobs: Option<usize>,
    pub data: Option<DataSection>,
    pub train: Option<TrainSection>,
    pub evaluate: Option<EvaluateSection>,
    pub reconstruct: Option<ReconstructSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// shapes | shapes-plus | mnist
    pub kind: String,
    #[serde(default = "default_image_size")]
    pub image_size: usize,
    #[serde(default = "default_train_count")]
    pub train_count: usize,
    #[serde(default = "default_test_count")]
    pub test_count: usize,
    /// Shape intensity range (shapes kinds).
    pub intensity: Option<(f64, f64)>,
    /// Directory with the standard IDX files (mnist kind).
    pub mnist_dir: Option<PathBuf>,
}

fn default_image_size() -> usize {
    32
}

fn default_train_count() -> usize {
    4_000
}

fn default_test_count() -> usize {
    500
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    /// ae | vae | gan
    pub model: String,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_latent")]
    pub latent_dim: usize,
    #[serde(default = "default_channels")]
    pub base_channels: usize,
    #[serde(default = "default_leaky")]
    pub leaky_alpha: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_gp")]
    pub gp_weight: f64,
    #[serde(default = "default_critic_steps")]
    pub critic_steps: usize,
    /// Dataset cache directory; defaults to {out}/data.
    pub data_dir: Option<PathBuf>,
}

fn default_epochs() -> usize {
    30
}

fn default_batch() -> usize {
    32
}

fn default_lr() -> f64 {
    1e-3
}

fn default_latent() -> usize {
    10
}

fn default_channels() -> usize {
    8
}

fn default_leaky() -> f64 {
    0.2
}

fn default_rho() -> f64 {
    0.1
}

fn default_gp() -> f64 {
    10.0
}

fn default_critic_steps() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    /// Checkpoint names under the models directory.
    pub checkpoints: Vec<String>,
    pub models_dir: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    /// Images for the reconstruction (NRMSE) protocol.
    #[serde(default = "default_encode_count")]
    pub encode_count: usize,
    /// Set size for the earth mover's distance.
    #[serde(default = "default_emd_count")]
    pub emd_count: usize,
    /// Random restarts for models without an encoder.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Reference points in the latent projection.
    #[serde(default = "default_projection_count")]
    pub projection_count: usize,
    #[serde(default = "default_encode_iters")]
    pub encode_max_iters: usize,
}

fn default_encode_count() -> usize {
    100
}

fn default_emd_count() -> usize {
    500
}

fn default_restarts() -> usize {
    4
}

fn default_projection_count() -> usize {
    1_000
}

fn default_encode_iters() -> usize {
    300
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSection {
    /// deconvolution | compressed-sensing | tomography
    pub problem: String,
    /// Any of: hard relaxed sparse sparse-tv pgd tikhonov tv.
    pub methods: Vec<String>,
    pub lambdas: Vec<f64>,
    #[serde(default = "default_mus")]
    pub mus: Vec<f64>,
    /// Noise standard deviation.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Test images to reconstruct.
    #[serde(default = "default_image_count")]
    pub image_count: usize,
    /// Checkpoint for the generative methods.
    pub model: Option<String>,
    pub models_dir: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    #[serde(default = "default_restarts_recon")]
    pub restarts: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Compressed sensing rows.
    #[serde(default = "default_m")]
    pub measurements: usize,
    /// Emit per-solve objective traces as CSV.
    #[serde(default)]
    pub traces: bool,
    /// Emit PGM previews and tensor files of reconstructions.
    #[serde(default)]
    pub images: bool,
}

fn default_mus() -> Vec<f64> {
    vec![1e-2]
}

fn default_sigma() -> f64 {
    0.1
}

fn default_image_count() -> usize {
    10
}

fn default_restarts_recon() -> usize {
    1
}

fn default_max_iters() -> usize {
    2_000
}

fn default_tol() -> f64 {
    1e-8
}

fn default_m() -> usize {
    150
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = "seed = 1\n[data]\nkind = \"shapes\"\nbanana = 3\n";
        let err = toml::from_str::<ExperimentConfig>(bad).unwrap_err();
        assert!(err.to_string().contains("banana"));
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let text = "[data]\nkind = \"shapes\"\n";
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        let data = cfg.data.unwrap();
        assert_eq!(data.image_size, 32);
        assert_eq!(data.train_count, 4_000);
    }
}
