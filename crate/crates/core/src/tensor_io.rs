//! Tensor interchange: a flat little-endian `f32` payload plus a JSON sidecar
//! (`<path>.json`) carrying the shape.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};
use crate::model::SCHEMA_VERSION;

pub const DTYPE: &str = "f32le";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub schema_version: u32,
    pub dtype: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum TensorIoError {
    #[error(transparent)]
    Io(#[from] JsonlError),
    #[error("invalid sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error("payload has {actual} bytes, shape {shape:?} needs {expected}")]
    SizeMismatch { shape: Vec<usize>, expected: usize, actual: usize },
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode(tensor: &ArrayD<f32>) -> Vec<u8> {
    tensor.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode(shape: &[usize], bytes: &[u8]) -> Result<ArrayD<f32>, TensorIoError> {
    let count: usize = shape.iter().product();
    if bytes.len() != count * 4 {
        return Err(TensorIoError::SizeMismatch {
            shape: shape.to_vec(),
            expected: count * 4,
            actual: bytes.len(),
        });
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(ArrayD::from_shape_vec(IxDyn(shape), data).expect("length checked above"))
}

pub fn write_tensor(path: &Path, tensor: &ArrayD<f32>) -> Result<(), TensorIoError> {
    let header = TensorHeader {
        schema_version: SCHEMA_VERSION,
        dtype: DTYPE.to_string(),
        shape: tensor.shape().to_vec(),
    };
    jsonl::write_atomic(path, &encode(tensor))?;
    jsonl::write_atomic(&sidecar_path(path), jsonl::to_canonical_pretty(&header).as_bytes())?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<ArrayD<f32>, TensorIoError> {
    let side = sidecar_path(path);
    let text = jsonl::read_to_string(&side)?;
    let header: TensorHeader = serde_json::from_str(&text)
        .map_err(|e| TensorIoError::Sidecar { path: side.clone(), message: e.to_string() })?;
    if header.dtype != DTYPE {
        return Err(TensorIoError::Sidecar {
            path: side,
            message: format!("unsupported dtype {}", header.dtype),
        });
    }
    if header.schema_version != SCHEMA_VERSION {
        return Err(TensorIoError::Sidecar {
            path: side,
            message: format!("unsupported schema_version {}", header.schema_version),
        });
    }
    let bytes = fs::read(path).map_err(|e| JsonlError::io(path, e))?;
    decode(&header.shape, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn bit_exact_round_trip(bits in proptest::collection::vec(any::<u32>(), 1..64)) {
            let n = bits.len();
            let t = ArrayD::from_shape_vec(IxDyn(&[n, 1]), bits.iter().map(|b| f32::from_bits(*b)).collect()).unwrap();
            let back = decode(&[n, 1], &encode(&t)).unwrap();
            let a: Vec<u32> = t.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn file_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.bin");
        let t = ArrayD::from_shape_fn(IxDyn(&[2, 3, 4]), |ix| (ix[0] * 12 + ix[1] * 4 + ix[2]) as f32 * 0.1);
        write_tensor(&p, &t).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 96);
        let side = fs::read_to_string(sidecar_path(&p)).unwrap();
        assert!(side.contains("\"shape\""));
        assert_eq!(read_tensor(&p).unwrap(), t);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        assert!(matches!(decode(&[2, 2], &[0u8; 12]), Err(TensorIoError::SizeMismatch { .. })));
    }
}
