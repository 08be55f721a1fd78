//! Datasets: the synthetic Shapes / Shapes+ families and the MNIST IDX
//! loader, plus the on-disk split cache.

mod cache;
mod mnist;
mod shapes;

pub use cache::{load_split, save_split, SplitManifest};
pub use mnist::{load_mnist, load_mnist_images};
pub use shapes::{generate_shapes, ShapesConfig};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A list of grayscale images (each H x W with values in [0,1]) plus
/// provenance.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<Tensor>,
    pub split: String,
    pub provenance: String,
}

impl Dataset {
    pub fn new(images: Vec<Tensor>, split: impl Into<String>, provenance: impl Into<String>) -> Result<Self> {
        let ds = Dataset {
            images,
            split: split.into(),
            provenance: provenance.into(),
        };
        ds.check_bounds()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image_shape(&self) -> &[usize] {
        self.images[0].shape()
    }

    /// All pixel values must lie in [0,1].
    pub fn check_bounds(&self) -> Result<()> {
        for (i, img) in self.images.iter().enumerate() {
            let (lo, hi) = (img.min_value(), img.max_value());
            if lo < 0.0 || hi > 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "image {i} has pixel range [{lo}, {hi}], outside [0,1]"
                )));
            }
        }
        Ok(())
    }

    /// First `n` images as a new dataset.
    pub fn take(&self, n: usize) -> Dataset {
        Dataset {
            images: self.images.iter().take(n).cloned().collect(),
            split: self.split.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Stack images into one (N,1,H,W) batch tensor.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty batch".to_string()));
        }
        let shape = self.image_shape().to_vec();
        let (h, w) = (shape[0], shape[1]);
        let mut data = Vec::with_capacity(indices.len() * h * w);
        for &i in indices {
            let img = self.images.get(i).ok_or_else(|| {
                Error::InvalidArgument(format!("batch index {i} out of range ({})", self.len()))
            })?;
            data.extend_from_slice(img.data());
        }
        Tensor::new(vec![indices.len(), 1, h, w], data)
    }
}
