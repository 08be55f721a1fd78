//! Small deterministic output formats: 8-bit PGM previews and mosaics.

mod pgm;

pub use pgm::{write_pgm, write_pgm_mosaic};
