//! MNIST IDX loader. Reads the standard uncompressed IDX image files
//! (magic 0x00000803) and rescales pixels to [0,1].

use std::io::Read;
use std::path::Path;

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;

/// Load one IDX image file.
pub fn load_mnist_images(path: &Path) -> Result<Vec<Tensor>> {
    let display = path.display().to_string();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)
        .map_err(|e| Error::io(&display, e))?;

    let fail = |reason: String| Error::Format {
        file: display.clone(),
        reason,
    };
    if buf.len() < 16 {
        return Err(fail(format!("file too short for an IDX header ({} bytes)", buf.len())));
    }
    let magic = u32::from_be_bytes(buf[0..4].try_into().unwrap());
    if magic != IDX_IMAGE_MAGIC {
        return Err(fail(format!(
            "bad magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x} for images"
        )));
    }
    let count = u32::from_be_bytes(buf[4..8].try_into().unwrap()) as usize;
    let rows = u32::from_be_bytes(buf[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_be_bytes(buf[12..16].try_into().unwrap()) as usize;
    let expected = 16 + count * rows * cols;
    if buf.len() != expected {
        return Err(fail(format!(
            "payload truncated: header promises {count} images of {rows}x{cols} \
             ({expected} bytes), file has {}",
            buf.len()
        )));
    }
    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let start = 16 + i * rows * cols;
        let data: Vec<f64> = buf[start..start + rows * cols]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect();
        images.push(Tensor::new(vec![rows, cols], data)?);
    }
    Ok(images)
}

/// Load the standard train/test pair from a directory containing
/// `train-images-idx3-ubyte` and `t10k-images-idx3-ubyte`.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train = load_mnist_images(&dir.join("train-images-idx3-ubyte"))?;
    let test = load_mnist_images(&dir.join("t10k-images-idx3-ubyte"))?;
    Ok((
        Dataset::new(train, "train", "mnist")?,
        Dataset::new(test, "test", "mnist")?,
    ))
}
