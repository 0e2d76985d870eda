//! Versioned binary checkpoints: a flat list of named parameters.
//!
//! Layout: magic `ASDM`, version u16 LE, parameter count u32 LE, then per
//! parameter: name length u16 LE, name bytes, shape rank u8, each dim u32 LE,
//! and the row-major f64 LE payload. Save/load round-trips bit-exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::model::FusionModel;
use crate::numerics::Tensor;

const MAGIC: &[u8; 4] = b"ASDM";
const VERSION: u16 = 1;

pub fn save_checkpoint(path: &Path, model: &FusionModel) -> Result<()> {
    let params = model.parameters();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC).map_err(|e| Error::io(path, e))?;
    w.write_all(&VERSION.to_le_bytes())
        .map_err(|e| Error::io(path, e))?;
    w.write_all(&(params.len() as u32).to_le_bytes())
        .map_err(|e| Error::io(path, e))?;
    for p in params {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u16).to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
        w.write_all(name).map_err(|e| Error::io(path, e))?;
        let shape = p.value.shape();
        w.write_all(&[shape.len() as u8])
            .map_err(|e| Error::io(path, e))?;
        for &d in shape {
            w.write_all(&(d as u32).to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Load a checkpoint into a model built from the same configuration. Every
/// parameter must match by name and shape; extras or gaps are errors.
pub fn load_checkpoint(path: &Path, model: &mut FusionModel) -> Result<()> {
    let entries = read_entries(path)?;
    let mut params = model.parameters_mut();
    if entries.len() != params.len() {
        return Err(Error::Model(format!(
            "checkpoint {} has {} parameters, model has {}",
            path.display(),
            entries.len(),
            params.len()
        )));
    }
    for p in params.iter_mut() {
        let tensor = entries.get(&p.name).ok_or_else(|| {
            Error::Model(format!(
                "checkpoint {} is missing parameter {}",
                path.display(),
                p.name
            ))
        })?;
        if tensor.shape() != p.value.shape() {
            return Err(Error::ShapeMismatch {
                context: "load_checkpoint",
                expected: format!("{:?} for {}", p.value.shape(), p.name),
                actual: format!("{:?}", tensor.shape()),
            });
        }
        p.value = tensor.clone();
        p.zero_grad();
    }
    Ok(())
}

fn read_entries(path: &Path) -> Result<BTreeMap<String, Tensor>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |m: &str| Error::Format {
        path: path.to_path_buf(),
        message: m.to_string(),
    };

    let mut head = [0u8; 4];
    r.read_exact(&mut head).map_err(|_| bad("truncated header"))?;
    if &head != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut u16buf = [0u8; 2];
    r.read_exact(&mut u16buf).map_err(|_| bad("truncated header"))?;
    if u16::from_le_bytes(u16buf) != VERSION {
        return Err(bad("unsupported version"));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(|_| bad("truncated header"))?;
    let count = u32::from_le_bytes(u32buf) as usize;

    let mut entries = BTreeMap::new();
    for _ in 0..count {
        r.read_exact(&mut u16buf).map_err(|_| bad("truncated name"))?;
        let name_len = u16::from_le_bytes(u16buf) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(|_| bad("truncated name"))?;
        let name = String::from_utf8(name).map_err(|_| bad("non-utf8 name"))?;

        let mut rank = [0u8; 1];
        r.read_exact(&mut rank).map_err(|_| bad("truncated shape"))?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            r.read_exact(&mut u32buf).map_err(|_| bad("truncated shape"))?;
            shape.push(u32::from_le_bytes(u32buf) as usize);
        }
        let volume: usize = shape.iter().product();
        let mut payload = vec![0u8; volume * 8];
        r.read_exact(&mut payload)
            .map_err(|_| bad("truncated payload"))?;
        let data: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        entries.insert(name, Tensor::new(shape, data)?);
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::model::{ModalityConfig, ModalityKind, ModelConfig};

    fn model(seed: u64) -> FusionModel {
        FusionModel::new(ModelConfig::new(
            vec![
                ModalityConfig::new(ModalityKind::Embedding { dim: 5 }, 5),
                ModalityConfig::new(ModalityKind::HotVector { dim: 8 }, 16),
            ],
            true,
            seed,
        ))
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let source = model(99);
        save_checkpoint(&path, &source).unwrap();

        let mut target = model(7); // different init, same layout
        load_checkpoint(&path, &mut target).unwrap();
        for (a, b) in source.parameters().iter().zip(target.parameters().iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.value.data(), b.value.data());
        }
    }

    #[test]
    fn incompatible_model_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_checkpoint(&path, &model(1)).unwrap();

        let mut other = FusionModel::new(ModelConfig::new(
            vec![ModalityConfig::new(ModalityKind::Embedding { dim: 5 }, 5)],
            true,
            0,
        ))
        .unwrap();
        assert!(load_checkpoint(&path, &mut other).is_err());
    }

    #[test]
    fn truncated_checkpoint_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_checkpoint(&path, &model(1)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        let mut target = model(2);
        assert!(load_checkpoint(&path, &mut target).is_err());
    }
}
