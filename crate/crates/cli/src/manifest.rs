//! Run manifests and manifold directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kmr_core::kernels::{FeatureMap, KernelSpec};
use kmr_core::manifold::{ManifoldKind, TrainedManifold, TrainingConfig};
use kmr_core::numerics::{Matrix, Vector};
use kmr_core::pod::PodBasis;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::format::{create_dir, read_json, read_matrix, write_json, write_matrix};

pub const RUN_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: PathBuf,
    pub content_hash: String,
}

/// Everything needed to rebuild a trained manifold from its matrix files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldHeader {
    pub kind: String,
    pub dim: usize,
    pub r: usize,
    /// Augmenting modes actually used, which may be fewer than requested.
    pub m: usize,
    pub lambda: f64,
    /// Kernel including any fitted input normalizer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_map: Option<FeatureMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub timestamp: String,
    pub dataset: DatasetRef,
    pub config: TrainingConfig,
    pub manifold: ManifoldHeader,
    pub metrics: BTreeMap<String, f64>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    /// SHA-256 of each matrix file in the directory.
    pub files: BTreeMap<String, String>,
}

impl ManifoldHeader {
    pub fn of(manifold: &TrainedManifold) -> Self {
        let (kernel, feature_map) = match &manifold.kind {
            ManifoldKind::PodOnly => (None, None),
            ManifoldKind::Kernel { kernel, .. } => (Some(kernel.clone()), None),
            ManifoldKind::FeatureMap { feature_map, .. } => (None, Some(feature_map.clone())),
        };
        ManifoldHeader {
            kind: manifold.kind.name().into(),
            dim: manifold.dim(),
            r: manifold.r(),
            m: manifold.m(),
            lambda: manifold.lambda,
            kernel,
            feature_map,
        }
    }
}

fn vector_matrix(v: &[f64]) -> Matrix {
    Matrix::from_column_slice(v.len(), 1, v)
}

/// Writes the matrix files of `manifold` into `dir`; returns their hashes.
pub fn write_manifold_files(dir: &Path, manifold: &TrainedManifold) -> Result<BTreeMap<String, String>> {
    create_dir(dir)?;
    let basis = &manifold.basis;
    let mut files = vec![
        ("offset.kmat", vector_matrix(basis.offset.as_slice())),
        ("v.kmat", basis.v.clone()),
        ("singular_values.kmat", vector_matrix(&basis.singular_values)),
    ];
    if basis.m() > 0 {
        files.push(("v_bar.kmat", basis.v_bar.clone()));
    }
    match &manifold.kind {
        ManifoldKind::PodOnly => {}
        ManifoldKind::Kernel {
            omega, train_inputs, ..
        } => {
            files.push(("omega.kmat", omega.clone()));
            files.push(("train_inputs.kmat", train_inputs.clone()));
        }
        ManifoldKind::FeatureMap { xi, .. } => files.push(("xi.kmat", xi.clone())),
    }
    let mut hashes = BTreeMap::new();
    for (name, a) in files {
        hashes.insert(name.to_string(), write_matrix(&dir.join(name), &a, None, None)?);
    }
    Ok(hashes)
}

pub fn save_manifold(dir: &Path, manifold: &TrainedManifold, mut manifest: RunManifest) -> Result<RunManifest> {
    manifest.files = write_manifold_files(dir, manifold)?;
    manifest.manifold = ManifoldHeader::of(manifold);
    write_json(&dir.join(RUN_MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<RunManifest> {
    read_json(&dir.join(RUN_MANIFEST))
}

pub fn load_manifold(dir: &Path) -> Result<(TrainedManifold, RunManifest)> {
    let manifest = load_manifest(dir)?;
    let h = &manifest.manifold;
    let read = |name: &str| -> Result<Matrix> {
        let path = dir.join(name);
        let (a, sidecar) = read_matrix(&path)?;
        if manifest.files.get(name) != Some(&sidecar.sha256) {
            return Err(CliError::format(&path, "hash does not match run manifest"));
        }
        Ok(a)
    };
    let bad = |what: &str| CliError::format(&dir.join(RUN_MANIFEST), what.to_string());

    let offset = read("offset.kmat")?;
    let v = read("v.kmat")?;
    let v_bar = if h.m > 0 { read("v_bar.kmat")? } else { Matrix::zeros(h.dim, 0) };
    let sv = read("singular_values.kmat")?;
    if offset.shape() != (h.dim, 1) || v.shape() != (h.dim, h.r) || v_bar.shape() != (h.dim, h.m) {
        return Err(bad("basis shapes do not match header"));
    }
    let basis = PodBasis {
        offset: Vector::from_column_slice(offset.as_slice()),
        v,
        v_bar,
        singular_values: sv.as_slice().to_vec(),
    };
    let kind = match h.kind.as_str() {
        "pod_only" => ManifoldKind::PodOnly,
        "kernel" => {
            let kernel = h.kernel.clone().ok_or_else(|| bad("kernel manifold without kernel"))?;
            let omega = read("omega.kmat")?;
            let train_inputs = read("train_inputs.kmat")?;
            if train_inputs.nrows() != h.r || omega.shape() != (train_inputs.ncols(), h.m) {
                return Err(bad("kernel coefficient shapes do not match header"));
            }
            ManifoldKind::Kernel {
                kernel,
                omega,
                train_inputs,
            }
        }
        "feature_map" => {
            let feature_map = h.feature_map.clone().ok_or_else(|| bad("feature-map manifold without map"))?;
            let xi = read("xi.kmat")?;
            if xi.shape() != (h.m, feature_map.dim(h.r)) {
                return Err(bad("feature-map coefficient shape does not match header"));
            }
            ManifoldKind::FeatureMap { feature_map, xi }
        }
        other => return Err(bad(&format!("unknown manifold kind `{other}`"))),
    };
    Ok((
        TrainedManifold {
            basis,
            kind,
            lambda: h.lambda,
        },
        manifest,
    ))
}
