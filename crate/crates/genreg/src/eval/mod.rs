//! Generator-quality metrics and diagnostics, plus reconstruction
//! metrics.

mod diag;
mod emd;
mod encode;
mod metrics;
mod report;

pub use diag::{
    apply_projection, gaussian_projection, interpolation_grid, latent_projection_2d,
    sample_far_from_prior, ALPHA_GRID,
};
pub use emd::{emd, solve_assignment};
pub use encode::{encode_by_optimization, EncodeResult};
pub use metrics::{nrmse, psnr, PSNR_CAP_DB};
pub use report::{fmt_float, Aggregates, MetricRecord, MetricReport};
