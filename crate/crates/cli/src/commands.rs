//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use kmr_core::manifold::train;
use kmr_core::metrics::{evaluate, timed, MetricKind};
use kmr_core::numerics::JitterPolicy;

use crate::dataset::{generate, load_dataset, DatasetManifest, ProblemConfig, Split};
use crate::error::{CliError, Result};
use crate::format::{read_config, read_json, write_json};
use crate::manifest::{load_manifold, save_manifold, DatasetRef, ManifoldHeader, RunManifest};
use crate::methods::{kernel_label, method_label, MethodId, PolynomialOptions, RunChoice};
use crate::report::build_report;
use crate::results::{append_rows, write_rows, ResultRow};
use crate::sweep::{run_sweep, summarize, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "kmr", version, about = "POD manifolds with kernel-interpolated nonlinear corrections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a snapshot dataset.
    Generate(GenerateArgs),
    /// Train a manifold on a dataset.
    Train(TrainArgs),
    /// Evaluate a trained manifold and append a CSV row.
    Evaluate(EvaluateArgs),
    /// Run a hyperparameter sweep.
    Sweep(SweepArgs),
    /// Render tables and plots from a results CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// surface-heating, advdiff or import.
    #[arg(required_unless_present = "replay")]
    pub problem: Option<String>,
    /// JSON config for the problem.
    #[arg(long, conflicts_with_all = ["preset", "replay"])]
    pub config: Option<PathBuf>,
    /// Built-in scale: desk or full.
    #[arg(long, conflicts_with = "replay")]
    pub preset: Option<String>,
    /// Regenerate from an existing dataset.json.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, required_unless_present = "replay")]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, required_unless_present_any = ["replay", "config"])]
    pub method: Option<MethodId>,
    #[arg(long, required_unless_present_any = ["replay", "config"])]
    pub r: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// RBF name (gaussian, matern_basic, ...), polynomial or quadratic.
    #[arg(long)]
    pub kernel: Option<String>,
    /// RBF shape parameter.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Normalize latent inputs to [0, 1] before the kernel.
    #[arg(long)]
    pub normalize: bool,
    /// Use a zero offset instead of the snapshot mean.
    #[arg(long)]
    pub zero_offset: bool,
    /// `fail` or a jitter magnitude such as 1e-14.
    #[arg(long)]
    pub jitter: Option<String>,
    #[arg(long)]
    pub poly_c: Option<f64>,
    #[arg(long)]
    pub poly_rho: Option<f64>,
    #[arg(long)]
    pub poly_degree: Option<u32>,
    /// JSON run description instead of flags.
    #[arg(long, conflicts_with_all = ["method", "replay"])]
    pub config: Option<PathBuf>,
    /// Retrain from an existing manifold manifest.json.
    #[arg(long, conflicts_with = "method")]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifold: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// train or test.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value = "mean_rel_l2")]
    pub metric: String,
    /// Results CSV to append to.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the full report, per-snapshot errors included, as JSON.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    /// Results CSV, overwritten.
    #[arg(long)]
    pub out: PathBuf,
    /// Best-config summary; defaults to `<out>.summary.json`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Manifold directories whose singular values to plot.
    #[arg(long)]
    pub manifold: Vec<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a).map(|_| ()),
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(&a).map(|_| ()),
        Command::Report(a) => cmd_report(&a).map(|_| ()),
    }
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<DatasetManifest> {
    let config = if let Some(path) = &a.replay {
        let old: DatasetManifest = read_json(path)?;
        old.config
    } else {
        let problem = a.problem.as_deref().unwrap_or_default();
        match (&a.config, &a.preset) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                ProblemConfig::from_json(problem, &text)?
            }
            (None, Some(preset)) => ProblemConfig::preset(problem, preset)?,
            (None, None) => ProblemConfig::preset(problem, "desk")?,
            (Some(_), Some(_)) => unreachable!("clap rejects --config with --preset"),
        }
    };
    let manifest = generate(&config, &a.out)?;
    println!(
        "generated {} dataset: N = {}, train {}, test {}, hash {}",
        config.id(),
        manifest.dim,
        manifest.train_snapshots,
        manifest.test_snapshots,
        manifest.content_hash
    );
    Ok(manifest)
}

fn parse_jitter(s: &str) -> Result<JitterPolicy> {
    if s == "fail" {
        return Ok(JitterPolicy::Fail);
    }
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(JitterPolicy::Jitter(x)),
        _ => Err(CliError::Config(format!("--jitter expects `fail` or a positive magnitude, got `{s}`"))),
    }
}

fn canonical(path: &Path) -> PathBuf {
    std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

pub fn cmd_train(a: &TrainArgs) -> Result<RunManifest> {
    let (cfg, dataset_dir, expected_hash) = if let Some(path) = &a.replay {
        let old: RunManifest = read_json(path)?;
        let dir = a.dataset.clone().unwrap_or(old.dataset.path.clone());
        (old.config, dir, Some(old.dataset.content_hash))
    } else {
        let choice = if let Some(path) = &a.config {
            read_config::<RunChoice>(path)?
        } else {
            RunChoice {
                method: a.method.expect("clap requires --method"),
                r: a.r.expect("clap requires --r"),
                m: a.m.unwrap_or(0),
                kernel: a.kernel.clone(),
                epsilon: a.eps,
                lambda: a.lambda,
                normalize: a.normalize,
                polynomial: PolynomialOptions {
                    c: a.poly_c,
                    rho: a.poly_rho,
                    degree: a.poly_degree,
                },
                zero_offset: a.zero_offset,
                jitter: a.jitter.as_deref().map(parse_jitter).transpose()?,
            }
        };
        let dir = a.dataset.clone().expect("clap requires --dataset");
        (choice.training_config()?, dir, None)
    };

    let (data, load_t) = timed(|| load_dataset(&dataset_dir));
    let data = data?;
    if let Some(h) = expected_hash {
        if h != data.manifest.content_hash {
            return Err(CliError::Config(format!(
                "dataset {} does not match the manifest's content hash",
                dataset_dir.display()
            )));
        }
    }
    let train_set = data.split(Split::Train);
    let (trained, train_t) = timed(|| train(train_set, &cfg));
    let trained = trained?;
    let train_err = evaluate(MetricKind::RelL2Trajectory, train_set, &trained)?;

    let manifest = RunManifest {
        command: "train".into(),
        tool_version: crate::TOOL_VERSION.into(),
        timestamp: crate::timestamp(),
        dataset: DatasetRef {
            path: canonical(&dataset_dir),
            content_hash: data.manifest.content_hash.clone(),
        },
        config: cfg,
        manifold: ManifoldHeader::of(&trained),
        metrics: BTreeMap::from([("train_rel_l2_trajectory".to_string(), train_err.value)]),
        timings: BTreeMap::from([
            ("load_s".to_string(), load_t.as_secs_f64()),
            ("train_s".to_string(), train_t.as_secs_f64()),
        ]),
        files: BTreeMap::new(),
    };
    let manifest = save_manifold(&a.out, &trained, manifest)?;
    println!(
        "trained {} manifold: r = {}, m = {}, train rel_l2_trajectory = {:e}, {:.3} s",
        manifest.manifold.kind,
        manifest.manifold.r,
        manifest.manifold.m,
        train_err.value,
        train_t.as_secs_f64()
    );
    Ok(manifest)
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(CliError::Config(format!("--split expects train or test, got `{other}`"))),
    }
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<ResultRow> {
    let metric = MetricKind::from_name(&a.metric)
        .ok_or_else(|| CliError::Config(format!("unknown metric `{}`", a.metric)))?;
    let split = parse_split(&a.split)?;
    let (manifold, manifest) = load_manifold(&a.manifold)?;
    let data = load_dataset(&a.dataset)?;
    let report = evaluate(metric, data.split(split), &manifold)?;

    let cfg = &manifest.config;
    let (kernel, epsilon) = match kernel_label(cfg) {
        Some((k, e)) => (Some(k), e),
        None => (None, None),
    };
    let row = ResultRow {
        method: method_label(cfg).into(),
        r: cfg.r,
        m: cfg.m,
        kernel,
        epsilon,
        lambda: cfg.lambda,
        normalize: cfg.normalize_inputs,
        metric: metric.name().into(),
        value: Some(report.value),
        train_time_s: manifest.timings.get("train_s").copied(),
        source: "computed".into(),
        error: None,
    };
    if let Some(path) = &a.csv {
        append_rows(path, std::slice::from_ref(&row))?;
    }
    if let Some(path) = &a.report_out {
        write_json(path, &report)?;
    }
    println!("{} = {:e}", metric.name(), report.value);
    Ok(row)
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<Vec<ResultRow>> {
    let spec: SweepSpec = read_config(&a.spec)?;
    let size = spec.size()?;
    println!("sweep: {size} configurations");
    let data = load_dataset(&a.dataset)?;
    let rows = run_sweep(&spec, data.split(Split::Train), data.split(spec.split.into()))?;
    write_rows(&a.out, &rows)?;
    let summary = summarize(&rows);
    let summary_path = a.summary.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_os_string();
        s.push(".summary.json");
        PathBuf::from(s)
    });
    write_json(&summary_path, &summary)?;
    println!("{} rows, {} failed", summary.rows, summary.failures);
    for (series, row) in &summary.best {
        println!(
            "best {series}: {} = {:e} (r = {}, m = {}, epsilon = {}, lambda = {:e}, normalize = {})",
            row.metric,
            row.value.unwrap_or(f64::NAN),
            row.r,
            row.m,
            row.epsilon.map(|e| e.to_string()).unwrap_or_else(|| "-".into()),
            row.lambda,
            row.normalize
        );
    }
    Ok(rows)
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let index = build_report(&a.csv, &a.manifold, &a.out)?;
    for f in &index.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

