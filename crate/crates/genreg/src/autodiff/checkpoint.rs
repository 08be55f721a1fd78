//! The flat binary tensor container used for checkpoints and dataset
//! caches.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes   "GRG1"
//! count   u32       number of tensor records
//! record  repeated:
//!     name_len u32, name bytes (UTF-8),
//!     rank     u32, dims rank x u64,
//!     payload  prod(dims) x f64
//! ```
//!
//! Round-trips are bit-exact: floats are stored as their raw IEEE-754
//! bits and names in sorted order.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"GRG1";

pub fn write_tensors(path: &Path, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let display = path.display().to_string();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(&display, e))?;
    file.write_all(&buf).map_err(|e| Error::io(&display, e))?;
    Ok(())
}

pub fn read_tensors(path: &Path) -> Result<BTreeMap<String, Tensor>> {
    let display = path.display().to_string();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)
        .map_err(|e| Error::io(&display, e))?;
    parse_tensors(&buf).map_err(|reason| Error::Format {
        file: display,
        reason,
    })
}

fn parse_tensors(buf: &[u8]) -> std::result::Result<BTreeMap<String, Tensor>, String> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> std::result::Result<&[u8], String> {
        if *pos + n > buf.len() {
            return Err(format!(
                "truncated: wanted {} bytes at offset {}, file has {}",
                n,
                *pos,
                buf.len()
            ));
        }
        let s = &buf[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let magic = take(&mut pos, 4)?;
    if magic != MAGIC {
        return Err(format!("bad magic {magic:?}, expected {MAGIC:?}"));
    }
    let count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let name_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
            .map_err(|_| "tensor name is not UTF-8".to_string())?;
        let rank = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize);
        }
        let numel: usize = dims.iter().product();
        let raw = take(&mut pos, numel * 8)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::new(dims, data).map_err(|e| e.to_string())?;
        if out.insert(name.clone(), tensor).is_some() {
            return Err(format!("duplicate tensor name '{name}'"));
        }
    }
    if pos != buf.len() {
        return Err(format!("{} trailing bytes after last record", buf.len() - pos));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, standard_normal};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join(format!("grg_ckpt_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.grg");

        let mut rng = rng_from_seed(123);
        let mut tensors = BTreeMap::new();
        tensors.insert("a.w".to_string(), standard_normal(&[3, 4], &mut rng));
        tensors.insert("b".to_string(), Tensor::scalar(-0.0));
        tensors.insert("c".to_string(), standard_normal(&[2, 1, 5], &mut rng));

        write_tensors(&path, &tensors).unwrap();
        let back = read_tensors(&path).unwrap();
        assert_eq!(back.len(), tensors.len());
        for (name, t) in &tensors {
            let r = &back[name];
            assert_eq!(r.shape(), t.shape());
            let bits_a: Vec<u64> = t.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = r.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }

        // same content writes identical bytes
        let path2 = dir.join("t2.grg");
        write_tensors(&path2, &tensors).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = std::env::temp_dir().join(format!("grg_ckpt_bad_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.grg");
        std::fs::write(&path, b"NOPE\x00\x00\x00\x00").unwrap();
        let err = read_tensors(&path).unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn truncation_is_reported() {
        let dir = std::env::temp_dir().join(format!("grg_ckpt_trunc_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.grg");
        let mut tensors = BTreeMap::new();
        tensors.insert("x".to_string(), Tensor::filled(&[8], 1.5));
        write_tensors(&path, &tensors).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let err = read_tensors(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
