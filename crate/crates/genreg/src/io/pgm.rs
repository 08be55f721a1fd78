//! Binary 8-bit PGM (P5) previews. Values are clamped to [0,1] and
//! quantised by round-half-up to 255 levels; byte output is a pure
//! function of the pixel data.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn quantise(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_pgm(path: &Path, image: &Tensor) -> Result<()> {
    if image.shape().len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "pgm wants a 2-d image, got {:?}",
            image.shape()
        )));
    }
    let (h, w) = (image.shape()[0], image.shape()[1]);
    let mut buf = format!("P5\n{w} {h}\n255\n").into_bytes();
    buf.extend(image.data().iter().map(|&v| quantise(v)));
    let display = path.display().to_string();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(&display, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&display, e))?;
    Ok(())
}

/// Tile a grid of equal-size images into one PGM with 1-pixel white
/// separators.
pub fn write_pgm_mosaic(path: &Path, grid: &[Vec<Tensor>]) -> Result<()> {
    if grid.is_empty() || grid[0].is_empty() {
        return Err(Error::InvalidArgument("empty mosaic".to_string()));
    }
    let shape = grid[0][0].shape().to_vec();
    let (h, w) = (shape[0], shape[1]);
    let rows = grid.len();
    let cols = grid[0].len();
    let (th, tw) = (rows * h + rows - 1, cols * w + cols - 1);
    let mut canvas = Tensor::filled(&[th, tw], 1.0);
    for (r, row) in grid.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::InvalidArgument("ragged mosaic".to_string()));
        }
        for (c, img) in row.iter().enumerate() {
            if img.shape() != shape.as_slice() {
                return Err(Error::shape("mosaic tile", &shape, img.shape()));
            }
            for i in 0..h {
                for j in 0..w {
                    canvas.set2(r * (h + 1) + i, c * (w + 1) + j, img.at2(i, j));
                }
            }
        }
    }
    write_pgm(path, &canvas)
}
