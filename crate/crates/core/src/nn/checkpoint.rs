//! Weight checkpoint files.
//!
//! Layout (little-endian): magic `LVCTW1`, then one record per parameter in
//! registration order: `u32` name length, UTF-8 name, `u32` rank, `rank`
//! `u32` dims, row-major `f32` values. Records run to end of file.

use std::path::Path;

use super::{Module, Scalar};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"LVCTW1";

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

pub fn encode_records(records: &[Record]) -> Vec<u8> {
    let mut out = CHECKPOINT_MAGIC.to_vec();
    for r in records {
        out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.extend_from_slice(&(r.dims.len() as u32).to_le_bytes());
        for &d in &r.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &r.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                detail: format!("{what} needs {n} bytes at offset {}", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_records(bytes: &[u8], path: &Path) -> Result<Vec<Record>> {
    if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..6] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic { path: path.to_path_buf(), expected: "LVCTW1" });
    }
    let mut rd = Reader { bytes, pos: 6, path };
    let mut records = Vec::new();
    while rd.pos < bytes.len() {
        let name_len = rd.u32("name length")? as usize;
        let name = String::from_utf8(rd.take(name_len, "name")?.to_vec())
            .map_err(|_| Error::Format(format!("{}: parameter name is not UTF-8", path.display())))?;
        let rank = rd.u32("rank")? as usize;
        if rank > 8 {
            return Err(Error::DimOverflow { path: path.to_path_buf(), detail: format!("rank {rank} for {name}") });
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(rd.u32("dim")? as usize);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4).map(|_| n))
            .ok_or_else(|| Error::DimOverflow { path: path.to_path_buf(), detail: format!("{name} dims {dims:?}") })?;
        let raw = rd.take(count * 4, "values")?;
        let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        records.push(Record { name, dims, values });
    }
    Ok(records)
}

pub fn module_records<T: Scalar, M: Module<T> + ?Sized>(module: &M) -> Vec<Record> {
    module
        .params()
        .iter()
        .map(|p| Record {
            name: p.name.clone(),
            dims: p.value.dims().to_vec(),
            values: p.value.data().iter().map(|v| v.as_f64() as f32).collect(),
        })
        .collect()
}

/// Copy `records` into `module`, checking names and shapes in order.
pub fn load_records<T: Scalar, M: Module<T> + ?Sized>(module: &mut M, records: &[Record]) -> Result<()> {
    let mut params = module.params_mut();
    if params.len() != records.len() {
        return Err(Error::GeometryMismatch(format!(
            "checkpoint has {} tensors, model expects {}",
            records.len(),
            params.len()
        )));
    }
    for (p, r) in params.iter_mut().zip(records) {
        if p.name != r.name || p.value.dims() != r.dims.as_slice() {
            return Err(Error::GeometryMismatch(format!(
                "checkpoint tensor {} {:?} does not match model tensor {} {:?}",
                r.name,
                r.dims,
                p.name,
                p.value.dims()
            )));
        }
    }
    for (p, r) in params.iter_mut().zip(records) {
        for (dst, &src) in p.value.data_mut().iter_mut().zip(&r.values) {
            *dst = T::from_f64_lossy(src as f64);
        }
    }
    Ok(())
}

pub fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    std::fs::write(path, encode_records(records)).map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    if !path.exists() {
        return Err(Error::MissingCheckpoint(path.to_path_buf()));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_records(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn sample() -> Vec<Record> {
        vec![
            Record {
                name: "a.weight".into(),
                dims: vec![2, 1, 3, 3],
                values: (0..18).map(|v| v as f32 * 0.5).collect(),
            },
            Record { name: "a.bias".into(), dims: vec![2], values: vec![-1.0, 1.5] },
        ]
    }

    #[test]
    fn roundtrip() {
        let bytes = encode_records(&sample());
        assert_eq!(&bytes[..6], b"LVCTW1");
        assert_eq!(decode_records(&bytes, &PathBuf::from("x")).unwrap(), sample());
    }

    #[test]
    fn truncated_and_bad_magic() {
        let bytes = encode_records(&sample());
        let p = PathBuf::from("x");
        let err = decode_records(&bytes[..bytes.len() - 3], &p).unwrap_err();
        assert_eq!(err.kind(), "truncated");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode_records(&bad, &p).unwrap_err().kind(), "bad_magic");
    }
}
