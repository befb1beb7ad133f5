//! Command-line harness for kernel-augmented POD manifolds: dataset
//! generation, training, evaluation, sweeps and reports, with every
//! artifact backed by a manifest that regenerates it bit-exactly.

// `!(x > 0.0)` is used on purpose so NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod dataset;
pub mod error;
pub mod format;
pub mod manifest;
pub mod methods;
pub mod report;
pub mod results;
pub mod sweep;

pub use error::{CliError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Current UTC time, RFC 3339 with second precision.
pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Sizes the global worker pool from `MF_THREADS`, if set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("MF_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("MF_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size worker pool: {e}")))
}
