//! On-disk matrix format and JSON helpers.
//!
//! A `.kmat` file is a 28-byte header followed by the column-major payload:
//!
//! | offset | size | content                      |
//! |--------|------|------------------------------|
//! | 0      | 8    | magic `KMRMAT\0\0`           |
//! | 8      | 4    | format version, `u32` LE     |
//! | 12     | 8    | rows, `u64` LE               |
//! | 20     | 8    | cols, `u64` LE               |
//! | 28     | 8·rows·cols | entries, `f64` LE     |
//!
//! Every matrix file `x.kmat` has a sidecar `x.kmat.json` holding its
//! dimensions, the SHA-256 of the `.kmat` bytes and optional snapshot labels.

use std::fs;
use std::path::{Path, PathBuf};

use kmr_core::numerics::Matrix;
use kmr_core::pod::SnapshotLabel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MAGIC: [u8; 8] = *b"KMRMAT\0\0";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub format_version: u32,
    pub rows: usize,
    pub cols: usize,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<SnapshotLabel>>,
    /// Factor the stored entries were multiplied by, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<f64>,
}

pub fn encode_matrix(a: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * a.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(a.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(a.ncols() as u64).to_le_bytes());
    // nalgebra storage is column-major already.
    for x in a.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        return Err(CliError::format(path, "file shorter than header"));
    }
    if bytes[..8] != MAGIC {
        return Err(CliError::format(path, "bad magic"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != FORMAT_VERSION {
        return Err(CliError::format(path, format!("unsupported version {version}")));
    }
    let (rows, cols) = (u64_at(12) as usize, u64_at(20) as usize);
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(CliError::format(
            path,
            format!("payload length {} does not match {rows}x{cols}", bytes.len() - HEADER_LEN),
        ));
    }
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Matrix::from_vec(rows, cols, data))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `a` and its sidecar; returns the SHA-256 of the matrix file.
pub fn write_matrix(
    path: &Path,
    a: &Matrix,
    labels: Option<&[SnapshotLabel]>,
    scaling: Option<f64>,
) -> Result<String> {
    let bytes = encode_matrix(a);
    let sha256 = sha256_hex(&bytes);
    fs::write(path, &bytes).map_err(|e| CliError::io(path, e))?;
    let sidecar = MatrixSidecar {
        format_version: FORMAT_VERSION,
        rows: a.nrows(),
        cols: a.ncols(),
        sha256: sha256.clone(),
        labels: labels.map(<[SnapshotLabel]>::to_vec),
        scaling,
    };
    write_json(&sidecar_path(path), &sidecar)?;
    Ok(sha256)
}

/// Reads a matrix and checks it against its sidecar.
pub fn read_matrix(path: &Path) -> Result<(Matrix, MatrixSidecar)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let sidecar: MatrixSidecar = read_json(&sidecar_path(path))?;
    let hash = sha256_hex(&bytes);
    if hash != sidecar.sha256 {
        return Err(CliError::format(path, "SHA-256 does not match sidecar"));
    }
    let a = decode_matrix(&bytes, path)?;
    if (a.nrows(), a.ncols()) != (sidecar.rows, sidecar.cols) {
        return Err(CliError::format(path, "dimensions do not match sidecar"));
    }
    Ok((a, sidecar))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Reads JSON that is part of an artifact; malformed content is a file error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
}

/// Reads a user-supplied JSON config; malformed content is a config error.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
