//! Dataset directories: `train.kmat`, `test.kmat` (with sidecars) and
//! `dataset.json`.

use std::path::{Path, PathBuf};

use kmr_core::pod::SnapshotSet;
use kmr_core::problems::{
    advdiff_split_dataset, surface_heating_dataset, AdvDiffDatasetConfig, SplitDataset, SurfaceHeatingDatasetConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::format::{create_dir, read_json, read_matrix, sha256_hex, write_json, write_matrix};

pub const DATASET_MANIFEST: &str = "dataset.json";
pub const TRAIN_FILE: &str = "train.kmat";
pub const TEST_FILE: &str = "test.kmat";

/// Snapshot files produced outside this tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportConfig {
    pub train: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "problem")]
pub enum ProblemConfig {
    SurfaceHeating(SurfaceHeatingDatasetConfig),
    Advdiff(AdvDiffDatasetConfig),
    Import(ImportConfig),
}

impl ProblemConfig {
    pub fn id(&self) -> &'static str {
        match self {
            ProblemConfig::SurfaceHeating(_) => "surface-heating",
            ProblemConfig::Advdiff(_) => "advdiff",
            ProblemConfig::Import(_) => "import",
        }
    }

    /// Built-in configuration for `problem` at `preset` scale.
    pub fn preset(problem: &str, preset: &str) -> Result<Self> {
        match (problem, preset) {
            ("surface-heating", "desk") => Ok(ProblemConfig::SurfaceHeating(SurfaceHeatingDatasetConfig::desk_scale())),
            ("surface-heating", "full") => Ok(ProblemConfig::SurfaceHeating(SurfaceHeatingDatasetConfig::full_scale())),
            ("advdiff", "desk") => Ok(ProblemConfig::Advdiff(AdvDiffDatasetConfig::desk_scale())),
            ("advdiff", "full") => Ok(ProblemConfig::Advdiff(AdvDiffDatasetConfig::full_scale())),
            ("import", _) => Err(CliError::Config("the import problem needs --config".into())),
            _ => Err(CliError::Config(format!("no preset `{preset}` for problem `{problem}`"))),
        }
    }

    /// Parses the problem-specific JSON body of a config file.
    pub fn from_json(problem: &str, text: &str) -> Result<Self> {
        let err = |e: serde_json::Error| CliError::Config(format!("{problem} config: {e}"));
        match problem {
            "surface-heating" => Ok(ProblemConfig::SurfaceHeating(serde_json::from_str(text).map_err(err)?)),
            "advdiff" => Ok(ProblemConfig::Advdiff(serde_json::from_str(text).map_err(err)?)),
            "import" => Ok(ProblemConfig::Import(serde_json::from_str(text).map_err(err)?)),
            other => Err(CliError::Config(format!(
                "unknown problem `{other}` (expected surface-heating, advdiff or import)"
            ))),
        }
    }

    fn layout(&self) -> &'static str {
        match self {
            ProblemConfig::SurfaceHeating(_) => {
                "rows: z fastest then theta; columns: mu2 fastest then mu1, even indices train, odd test"
            }
            ProblemConfig::Advdiff(_) => {
                "rows: x fastest then y; columns: time steps per alpha, alphas ascending; test is one trajectory"
            }
            ProblemConfig::Import(_) => "as supplied",
        }
    }

    pub fn build(&self) -> Result<SplitDataset> {
        match self {
            ProblemConfig::SurfaceHeating(c) => Ok(surface_heating_dataset(c)?),
            ProblemConfig::Advdiff(c) => Ok(advdiff_split_dataset(c)?),
            ProblemConfig::Import(c) => Ok(SplitDataset {
                train: load_snapshot_file(&c.train)?,
                test: load_snapshot_file(&c.test)?,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub command: String,
    pub tool_version: String,
    pub timestamp: String,
    pub config: ProblemConfig,
    pub layout: String,
    /// State dimension `N`.
    pub dim: usize,
    pub train_snapshots: usize,
    pub test_snapshots: usize,
    pub train_sha256: String,
    pub test_sha256: String,
    /// SHA-256 over the train and test matrix files, in that order.
    pub content_hash: String,
    pub wall_time_s: f64,
}

pub fn content_hash(train_sha: &str, test_sha: &str) -> String {
    sha256_hex(format!("{train_sha}{test_sha}").as_bytes())
}

/// Reads a `.kmat` file (with sidecar) as a snapshot set.
pub fn load_snapshot_file(path: &Path) -> Result<SnapshotSet> {
    Ok(load_snapshot_file_hashed(path)?.0)
}

/// Like [`load_snapshot_file`], also returning the verified file hash.
fn load_snapshot_file_hashed(path: &Path) -> Result<(SnapshotSet, String)> {
    let (states, sidecar) = read_matrix(path)?;
    let mut set = SnapshotSet::new(states)?.with_recorded_scaling(sidecar.scaling);
    if let Some(labels) = sidecar.labels {
        set = set.with_labels(labels)?;
    }
    Ok((set, sidecar.sha256))
}

pub fn write_snapshot_file(path: &Path, set: &SnapshotSet) -> Result<String> {
    write_matrix(path, set.states(), set.labels(), set.scaling())
}

/// Generates the dataset described by `config` into `out`.
pub fn generate(config: &ProblemConfig, out: &Path) -> Result<DatasetManifest> {
    let start = std::time::Instant::now();
    let data = config.build()?;
    if data.train.dim() != data.test.dim() {
        return Err(CliError::Config(format!(
            "train and test state dimensions differ: {} vs {}",
            data.train.dim(),
            data.test.dim()
        )));
    }
    create_dir(out)?;
    let train_sha256 = write_snapshot_file(&out.join(TRAIN_FILE), &data.train)?;
    let test_sha256 = write_snapshot_file(&out.join(TEST_FILE), &data.test)?;
    let manifest = DatasetManifest {
        command: "generate".into(),
        tool_version: crate::TOOL_VERSION.into(),
        timestamp: crate::timestamp(),
        config: config.clone(),
        layout: config.layout().into(),
        dim: data.train.dim(),
        train_snapshots: data.train.len(),
        test_snapshots: data.test.len(),
        content_hash: content_hash(&train_sha256, &test_sha256),
        train_sha256,
        test_sha256,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_json(&out.join(DATASET_MANIFEST), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub data: SplitDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl LoadedDataset {
    pub fn split(&self, split: Split) -> &SnapshotSet {
        match split {
            Split::Train => &self.data.train,
            Split::Test => &self.data.test,
        }
    }
}

pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let manifest: DatasetManifest = read_json(&dir.join(DATASET_MANIFEST))?;
    let (train, train_sha) = load_snapshot_file_hashed(&dir.join(TRAIN_FILE))?;
    let (test, test_sha) = load_snapshot_file_hashed(&dir.join(TEST_FILE))?;
    if content_hash(&train_sha, &test_sha) != manifest.content_hash {
        return Err(CliError::format(&dir.join(DATASET_MANIFEST), "content hash does not match matrix files"));
    }
    Ok(LoadedDataset {
        dir: dir.to_path_buf(),
        manifest,
        data: SplitDataset { train, test },
    })
}
