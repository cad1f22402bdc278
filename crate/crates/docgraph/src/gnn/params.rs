//! Named trainable parameters with gradient slots, plus a binary
//! checkpoint format with exact (bit-level) round-tripping.

use super::tensor::Tensor;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use thiserror::Error;

const MAGIC: &[u8; 4] = b"DGCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Vec<f64>,
}

impl Param {
    fn new(value: Tensor) -> Self {
        let grad = vec![0.0; value.data.len()];
        Param { value, grad }
    }
}

/// Name -> parameter map with deterministic (sorted) iteration order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) {
        assert!(
            !self.params.contains_key(name),
            "duplicate parameter name {name}"
        );
        self.params.insert(name.to_string(), Param::new(value));
    }

    pub fn get(&self, name: &str) -> &Param {
        self.params
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Param {
        self.params
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn accumulate_grad(&mut self, name: &str, grad: &[f64]) {
        let p = self.get_mut(name);
        assert_eq!(p.grad.len(), grad.len(), "gradient shape mismatch for {name}");
        for (a, b) in p.grad.iter_mut().zip(grad) {
            *a += b;
        }
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for (name, p) in &self.params {
            let bytes = name.as_bytes();
            w.write_all(&(bytes.len() as u32).to_le_bytes())?;
            w.write_all(bytes)?;
            w.write_all(&(p.value.rows as u64).to_le_bytes())?;
            w.write_all(&(p.value.cols as u64).to_le_bytes())?;
            for x in &p.value.data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(CheckpointError::BadVersion(version));
        }
        let count = read_u64(&mut r)? as usize;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            let mut name_bytes = vec![0u8; name_len];
            r.read_exact(&mut name_bytes)?;
            let name = String::from_utf8(name_bytes)
                .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
            let rows = read_u64(&mut r)? as usize;
            let cols = read_u64(&mut r)? as usize;
            let mut data = vec![0.0; rows * cols];
            let mut buf = [0u8; 8];
            for x in &mut data {
                r.read_exact(&mut buf)?;
                *x = f64::from_le_bytes(buf);
            }
            store.insert(&name, Tensor::new(rows, cols, data));
        }
        Ok(store)
    }

    pub fn save_to_path(&self, path: &std::path::Path) -> Result<(), CheckpointError> {
        let mut buf = Vec::new();
        self.save(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load_from_path(path: &std::path::Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path)?;
        Self::load(&bytes[..])
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, std::io::Error> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, std::io::Error> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_exact_round_trip() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::new(2, 3, vec![0.1, -0.2, 1e-300, f64::MAX, 3.5, -0.0]));
        store.insert("b", Tensor::new(1, 1, vec![0.123456789012345678]));
        let mut bytes = Vec::new();
        store.save(&mut bytes).unwrap();
        let loaded = ParamStore::load(&bytes[..]).unwrap();
        for name in ["w", "b"] {
            let a = &store.get(name).value;
            let b = &loaded.get(name).value;
            assert_eq!((a.rows, a.cols), (b.rows, b.cols));
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        // saving the loaded store is byte-identical
        let mut bytes2 = Vec::new();
        loaded.save(&mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn bad_magic_rejected() {
        let bytes = b"NOPE\x01\x00\x00\x00";
        assert!(matches!(
            ParamStore::load(&bytes[..]),
            Err(CheckpointError::BadMagic)
        ));
    }

    #[test]
    fn grad_accumulation() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::new(1, 2, vec![0.0, 0.0]));
        store.accumulate_grad("w", &[1.0, 2.0]);
        store.accumulate_grad("w", &[0.5, 0.5]);
        assert_eq!(store.get("w").grad, vec![1.5, 2.5]);
        store.zero_grads();
        assert_eq!(store.get("w").grad, vec![0.0, 0.0]);
    }
}
