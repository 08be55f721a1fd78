//! Dataset cache: one tensor-container file per split plus a TOML
//! manifest echoing the generating config.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::checkpoint::{read_tensors, write_tensors};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub split: String,
    pub provenance: String,
    pub count: usize,
    pub image_shape: Vec<usize>,
    /// Echo of the generating config, sufficient to reproduce the split.
    pub config_echo: String,
}

/// Write `dir/{name}.grg` and `dir/{name}.toml`.
pub fn save_split(dir: &Path, name: &str, dataset: &Dataset, config_echo: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let shape = dataset.image_shape().to_vec();
    let (h, w) = (shape[0], shape[1]);
    let mut data = Vec::with_capacity(dataset.len() * h * w);
    for img in &dataset.images {
        if img.shape() != shape.as_slice() {
            return Err(Error::shape("dataset images", &shape, img.shape()));
        }
        data.extend_from_slice(img.data());
    }
    let stacked = Tensor::new(vec![dataset.len(), h, w], data)?;
    let mut tensors = BTreeMap::new();
    tensors.insert("images".to_string(), stacked);
    write_tensors(&dir.join(format!("{name}.grg")), &tensors)?;

    let manifest = SplitManifest {
        split: dataset.split.clone(),
        provenance: dataset.provenance.clone(),
        count: dataset.len(),
        image_shape: shape,
        config_echo: config_echo.to_string(),
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialisation: {e}")))?;
    let mpath = dir.join(format!("{name}.toml"));
    std::fs::write(&mpath, text).map_err(|e| Error::io(mpath.display().to_string(), e))?;
    Ok(())
}

/// Read back a cached split written by [`save_split`].
pub fn load_split(dir: &Path, name: &str) -> Result<(Dataset, SplitManifest)> {
    let mpath = dir.join(format!("{name}.toml"));
    let text =
        std::fs::read_to_string(&mpath).map_err(|e| Error::io(mpath.display().to_string(), e))?;
    let manifest: SplitManifest = toml::from_str(&text).map_err(|e| Error::Format {
        file: mpath.display().to_string(),
        reason: e.to_string(),
    })?;

    let tpath = dir.join(format!("{name}.grg"));
    let tensors = read_tensors(&tpath)?;
    let stacked = tensors.get("images").ok_or_else(|| Error::Format {
        file: tpath.display().to_string(),
        reason: "missing 'images' tensor".to_string(),
    })?;
    let shape = stacked.shape();
    if shape.len() != 3 || shape[0] != manifest.count {
        return Err(Error::Format {
            file: tpath.display().to_string(),
            reason: format!(
                "images tensor shape {shape:?} disagrees with manifest count {}",
                manifest.count
            ),
        });
    }
    let (h, w) = (shape[1], shape[2]);
    let images: Result<Vec<Tensor>> = stacked
        .data()
        .chunks_exact(h * w)
        .map(|chunk| Tensor::new(vec![h, w], chunk.to_vec()))
        .collect();
    let ds = Dataset::new(images?, manifest.split.clone(), manifest.provenance.clone())?;
    Ok((ds, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_shapes, ShapesConfig};

    #[test]
    fn round_trip_preserves_images_bit_exactly() {
        let dir = std::env::temp_dir().join(format!("grg_cache_{}", std::process::id()));
        let cfg = ShapesConfig::new(32, 6, 44);
        let mut ds = generate_shapes(&cfg).unwrap();
        ds.split = "train".to_string();
        save_split(&dir, "train", &ds, "seed=44").unwrap();
        let (back, manifest) = load_split(&dir, "train").unwrap();
        assert_eq!(manifest.count, 6);
        assert_eq!(manifest.config_echo, "seed=44");
        assert_eq!(back.split, "train");
        for (a, b) in ds.images.iter().zip(&back.images) {
            let bits_a: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
