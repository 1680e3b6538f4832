//! `SARP1` binary container.
//!
//! Layout: the 5 magic bytes `SARP1`, a little-endian `u32` header length,
//! a UTF-8 JSON header, then the raw little-endian `f64` blobs back to back.
//! Complex blobs store interleaved `(re, im)` pairs. Blob offsets in the
//! header are relative to the start of the blob section.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"SARP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F64,
    C128,
}

impl Dtype {
    fn floats_per_element(self) -> usize {
        match self {
            Dtype::F64 => 1,
            Dtype::C128 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobInfo {
    pub name: String,
    pub offset: u64,
    pub length: u64,
    pub shape: Vec<usize>,
    pub dtype: Dtype,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    meta: serde_json::Value,
    blobs: Vec<BlobInfo>,
}

/// JSON metadata plus named numeric blobs.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub meta: serde_json::Value,
    blobs: Vec<(BlobInfo, Vec<f64>)>,
}

impl Container {
    pub fn new(meta: serde_json::Value) -> Self {
        Self {
            meta,
            blobs: Vec::new(),
        }
    }

    pub fn blob_names(&self) -> impl Iterator<Item = &str> {
        self.blobs.iter().map(|(info, _)| info.name.as_str())
    }

    fn push(&mut self, name: &str, shape: &[usize], dtype: Dtype, floats: Vec<f64>) -> Result<()> {
        if self.blobs.iter().any(|(b, _)| b.name == name) {
            return Err(Error::invalid(format!("duplicate blob name {name}")));
        }
        let expected = shape.iter().product::<usize>() * dtype.floats_per_element();
        if expected != floats.len() {
            return Err(Error::invalid(format!(
                "blob {name}: shape {shape:?} needs {expected} floats, got {}",
                floats.len()
            )));
        }
        let offset = self.blobs.iter().map(|(b, _)| b.length).sum();
        self.blobs.push((
            BlobInfo {
                name: name.to_string(),
                offset,
                length: 8 * floats.len() as u64,
                shape: shape.to_vec(),
                dtype,
            },
            floats,
        ));
        Ok(())
    }

    pub fn add_real(&mut self, name: &str, shape: &[usize], data: &[f64]) -> Result<()> {
        self.push(name, shape, Dtype::F64, data.to_vec())
    }

    pub fn add_complex(&mut self, name: &str, shape: &[usize], data: &[Complex64]) -> Result<()> {
        let floats = data.iter().flat_map(|z| [z.re, z.im]).collect();
        self.push(name, shape, Dtype::C128, floats)
    }

    fn blob(&self, name: &str, dtype: Dtype) -> Result<(&BlobInfo, &[f64])> {
        let (info, data) = self
            .blobs
            .iter()
            .find(|(b, _)| b.name == name)
            .ok_or_else(|| Error::Format(format!("missing blob {name}")))?;
        if info.dtype != dtype {
            return Err(Error::Format(format!(
                "blob {name} has dtype {:?}, expected {dtype:?}",
                info.dtype
            )));
        }
        Ok((info, data))
    }

    /// Shape and data of a real blob.
    pub fn real(&self, name: &str) -> Result<(&[usize], &[f64])> {
        self.blob(name, Dtype::F64)
            .map(|(info, data)| (info.shape.as_slice(), data))
    }

    /// Shape and data of a complex blob.
    pub fn complex(&self, name: &str) -> Result<(Vec<usize>, Vec<Complex64>)> {
        let (info, data) = self.blob(name, Dtype::C128)?;
        let values = data
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        Ok((info.shape.clone(), values))
    }

    pub fn has_blob(&self, name: &str) -> bool {
        self.blobs.iter().any(|(b, _)| b.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            meta: self.meta.clone(),
            blobs: self.blobs.iter().map(|(b, _)| b.clone()).collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let header_len = u32::try_from(json.len())
            .map_err(|_| Error::Format("header exceeds 4 GiB".into()))?;
        let body: usize = self.blobs.iter().map(|(_, d)| 8 * d.len()).sum();
        let mut out = Vec::with_capacity(MAGIC.len() + 4 + json.len() + body);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&json);
        for (_, data) in &self.blobs {
            for x in data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 {
            return Err(Error::Format(format!("file too short ({} bytes)", bytes.len())));
        }
        if &bytes[..5] != MAGIC {
            return Err(Error::Format("bad magic, not a SARP1 container".into()));
        }
        let header_len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
        let body_start = 9usize
            .checked_add(header_len)
            .filter(|end| *end <= bytes.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "header length {header_len} exceeds file size {}",
                    bytes.len()
                ))
            })?;
        let header: Header = serde_json::from_slice(&bytes[9..body_start])
            .map_err(|e| Error::Format(format!("invalid header: {e}")))?;
        let body = &bytes[body_start..];
        let mut expected_offset = 0u64;
        let mut blobs = Vec::with_capacity(header.blobs.len());
        for info in header.blobs {
            let floats = info
                .shape
                .iter()
                .try_fold(info.dtype.floats_per_element(), |acc, d| acc.checked_mul(*d))
                .ok_or_else(|| Error::Format(format!("blob {} shape overflows", info.name)))?;
            if info.length != 8 * floats as u64 {
                return Err(Error::Format(format!(
                    "blob {} declares {} bytes but its shape needs {}",
                    info.name,
                    info.length,
                    8 * floats
                )));
            }
            if info.offset != expected_offset {
                return Err(Error::Format(format!(
                    "blob {} at offset {} but previous blobs end at {expected_offset}",
                    info.name, info.offset
                )));
            }
            let end = info.offset + info.length;
            if end > body.len() as u64 {
                return Err(Error::Format(format!(
                    "blob {} ends at {end} past the {} data bytes in the file",
                    info.name,
                    body.len()
                )));
            }
            let data = body[info.offset as usize..end as usize]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            expected_offset = end;
            blobs.push((info, data));
        }
        if expected_offset != body.len() as u64 {
            return Err(Error::Format(format!(
                "{} trailing bytes after the last blob",
                body.len() as u64 - expected_offset
            )));
        }
        Ok(Self {
            meta: header.meta,
            blobs,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> Container {
        let mut c = Container::new(json!({"kind": "test", "n": 3}));
        c.add_real("a", &[2, 2], &[1.0, -2.0, 3.5, 0.0]).unwrap();
        c.add_complex("b", &[3], &[Complex64::new(1.0, 2.0), Complex64::new(-1.0, 0.5), Complex64::new(0.0, 0.0)])
            .unwrap();
        c
    }

    #[test]
    fn layout() {
        let bytes = sample().to_bytes().unwrap();
        assert_eq!(&bytes[..5], b"SARP1");
        let header_len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 9 + header_len + 8 * (4 + 6));
        let body = &bytes[9 + header_len..];
        assert_eq!(f64::from_le_bytes(body[8..16].try_into().unwrap()), -2.0);
        // first complex element interleaved as (re, im)
        assert_eq!(f64::from_le_bytes(body[32..40].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(body[40..48].try_into().unwrap()), 2.0);
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Container::from_bytes(&bad), Err(Error::Format(_))));
        assert!(matches!(Container::from_bytes(&bytes[..bytes.len() - 8]), Err(Error::Format(_))));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(Container::from_bytes(&longer), Err(Error::Format(_))));
        let mut huge = bytes.clone();
        huge[5..9].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(Container::from_bytes(&huge), Err(Error::Format(_))));
        assert!(Container::from_bytes(b"SARP").is_err());
    }

    #[test]
    fn typed_access() {
        let c = sample();
        assert!(c.real("b").is_err());
        assert!(c.complex("a").is_err());
        assert!(c.real("missing").is_err());
        assert_eq!(c.complex("b").unwrap().1[1], Complex64::new(-1.0, 0.5));
        let mut d = sample();
        assert!(d.add_real("a", &[1], &[0.0]).is_err());
        assert!(d.add_real("c", &[2], &[0.0]).is_err());
    }
}
