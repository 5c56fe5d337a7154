//! Grid snapshots: a JSON manifest next to a raw little-endian f64 file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{parameter, Result};
use crate::field_grid::GridField;
use crate::report::write_atomic;

/// Manifest describing one stored replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub axes: Vec<Vec<f64>>,
    pub seed: u64,
    pub model: String,
    pub params: serde_json::Value,
    pub replicate: u64,
    /// Diagonal jitter used by each factorization.
    pub jitter: Vec<f64>,
    /// Data file name, relative to the manifest.
    pub data: String,
}

/// Writes `<dir>/<stem>.json` and `<dir>/<stem>.bin`; returns the manifest path.
pub fn write_snapshot(dir: &Path, stem: &str, field: &GridField, manifest: &Manifest) -> Result<PathBuf> {
    if manifest.shape != field.shape() {
        return parameter("manifest shape does not match the field");
    }
    let data_name = format!("{stem}.bin");
    let mut m = manifest.clone();
    m.data = data_name.clone();
    let mut bytes = Vec::with_capacity(8 * field.len());
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(&dir.join(&data_name), &bytes)?;
    let path = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(&m)?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Reads a snapshot back from its manifest path.
pub fn read_snapshot(manifest_path: &Path) -> Result<(GridField, Manifest)> {
    let m: Manifest = serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let bytes = std::fs::read(dir.join(&m.data))?;
    let len: usize = m.shape.iter().product();
    if bytes.len() != 8 * len {
        return parameter(format!("data file holds {} bytes, expected {}", bytes.len(), 8 * len));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let field = GridField::new(m.axes.clone(), values)?;
    Ok((field, m))
}
