//! Minimal reverse-mode automatic differentiation over a fixed layer set,
//! plus the Adam optimizer and the binary checkpoint container.

pub mod checkpoint;
pub mod conv;
mod gemm;
pub mod layers;
pub mod params;
pub mod tape;

pub use conv::ConvSpec;
pub use layers::{apply_layer, Bindings, Layer, Mode, Network};
pub use params::{AdamConfig, ParamSet};
pub use tape::{GradMap, Tape, Var};
