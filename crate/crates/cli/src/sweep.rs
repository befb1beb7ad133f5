//! Cartesian hyperparameter sweeps.
//!
//! A sweep spec lists method entries, each with its own axes. The rows of a
//! sweep are the concatenation of each entry's cartesian product, expanded
//! in the order `r`, `m`, `kernel`, `epsilon`, `lambda`, `normalize` with
//! the last axis fastest.

use std::collections::BTreeMap;

use kmr_core::manifold::train_with_decomposition;
use kmr_core::metrics::{evaluate, timed, MetricKind};
use kmr_core::pod::{OffsetChoice, PodDecomposition, SnapshotSet};
use kmr_core::problems::logspace;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Split;
use crate::error::{CliError, Result};
use crate::methods::{is_rbf_name, MethodId, PolynomialOptions, RunChoice};
use crate::results::ResultRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Test,
}

impl From<SplitName> for Split {
    fn from(s: SplitName) -> Split {
        match s {
            SplitName::Train => Split::Train,
            SplitName::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogAxis {
    pub from: f64,
    pub to: f64,
    pub num: usize,
}

/// Either explicit values or `{"logspace": {"from", "to", "num"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RealAxis {
    Values(Vec<f64>),
    Log { logspace: LogAxis },
}

impl RealAxis {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            RealAxis::Values(v) => Ok(v.clone()),
            RealAxis::Log { logspace: l } => {
                if !(l.from > 0.0 && l.to > 0.0) || l.num == 0 {
                    return Err(CliError::Config(format!(
                        "logspace axis needs positive bounds and num >= 1, got {l:?}"
                    )));
                }
                Ok(logspace(l.from, l.to, l.num))
            }
        }
    }
}

/// `m` as fixed values or as multiples of `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MAxis {
    Fixed(Vec<usize>),
    TimesR(Vec<usize>),
}

impl MAxis {
    fn len(&self) -> usize {
        match self {
            MAxis::Fixed(v) | MAxis::TimesR(v) => v.len(),
        }
    }

    fn resolve(&self, r: usize) -> Vec<usize> {
        match self {
            MAxis::Fixed(v) => v.clone(),
            MAxis::TimesR(k) => k.iter().map(|k| k * r).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodAxes {
    pub method: MethodId,
    pub r: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<MAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<RealAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<RealAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<Vec<bool>>,
    #[serde(default)]
    pub polynomial: PolynomialOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_metric")]
    pub metric: MetricKind,
    #[serde(default = "default_split")]
    pub split: SplitName,
    #[serde(default)]
    pub zero_offset: bool,
    pub methods: Vec<MethodAxes>,
}

fn default_metric() -> MetricKind {
    MetricKind::MeanRelL2
}

fn default_split() -> SplitName {
    SplitName::Test
}

fn nonempty<T>(name: &str, method: MethodId, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(CliError::Config(format!("{}: axis `{name}` is empty", method.name())));
    }
    Ok(())
}

impl MethodAxes {
    fn check(&self) -> Result<()> {
        let id = self.method;
        let forbid = |name: &str, present: bool| -> Result<()> {
            if present {
                return Err(CliError::Config(format!("{}: axis `{name}` does not apply", id.name())));
            }
            Ok(())
        };
        nonempty("r", id, &self.r)?;
        if let Some(m) = &self.m {
            if m.len() == 0 {
                return Err(CliError::Config(format!("{}: axis `m` is empty", id.name())));
            }
        }
        if let Some(axis) = &self.lambda {
            nonempty("lambda", id, &axis.values()?)?;
        }
        if let Some(axis) = &self.epsilon {
            nonempty("epsilon", id, &axis.values()?)?;
        }
        if let Some(v) = &self.kernel {
            nonempty("kernel", id, v)?;
        }
        if let Some(v) = &self.normalize {
            nonempty("normalize", id, v)?;
        }
        match id {
            MethodId::Pod => {
                forbid("m", self.m.is_some())?;
                forbid("lambda", self.lambda.is_some())?;
                forbid("kernel", self.kernel.is_some())?;
                forbid("epsilon", self.epsilon.is_some())?;
                forbid("normalize", self.normalize.is_some())?;
            }
            MethodId::FmQm => {
                forbid("kernel", self.kernel.is_some())?;
                forbid("epsilon", self.epsilon.is_some())?;
                forbid("normalize", self.normalize.is_some())?;
                if self.m.is_none() || self.lambda.is_none() {
                    return Err(CliError::Config("fm_qm: axes `m` and `lambda` are required".into()));
                }
            }
            MethodId::Kernel => {
                let kernels = self
                    .kernel
                    .as_ref()
                    .ok_or_else(|| CliError::Config("kernel: axis `kernel` is required".into()))?;
                if self.m.is_none() || self.lambda.is_none() {
                    return Err(CliError::Config("kernel: axes `m` and `lambda` are required".into()));
                }
                let rbf = kernels.iter().filter(|k| is_rbf_name(k)).count();
                if rbf > 0 && rbf < kernels.len() {
                    return Err(CliError::Config(
                        "kernel: mixing RBF and non-RBF kernels in one entry would repeat rows along `epsilon`; \
                         use separate entries"
                            .into(),
                    ));
                }
                if (rbf > 0) != self.epsilon.is_some() {
                    return Err(CliError::Config(
                        "kernel: axis `epsilon` is required for RBF kernels and forbidden otherwise".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn expand(&self, zero_offset: bool) -> Result<Vec<RunChoice>> {
        self.check()?;
        let ms = self.m.clone().unwrap_or(MAxis::Fixed(vec![0]));
        let kernels: Vec<Option<String>> = match &self.kernel {
            Some(v) => v.iter().cloned().map(Some).collect(),
            None => vec![None],
        };
        let epsilons: Vec<Option<f64>> = match &self.epsilon {
            Some(a) => a.values()?.into_iter().map(Some).collect(),
            None => vec![None],
        };
        let lambdas = match &self.lambda {
            Some(a) => a.values()?,
            None => vec![0.0],
        };
        let normalize = self.normalize.clone().unwrap_or(vec![false]);

        let mut out = Vec::new();
        for &r in &self.r {
            for m in ms.resolve(r) {
                for kernel in &kernels {
                    for &epsilon in &epsilons {
                        for &lambda in &lambdas {
                            for &normalize in &normalize {
                                out.push(RunChoice {
                                    method: self.method,
                                    r,
                                    m,
                                    kernel: kernel.clone(),
                                    epsilon,
                                    lambda,
                                    normalize,
                                    polynomial: self.polynomial,
                                    zero_offset,
                                    jitter: None,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

impl SweepSpec {
    /// All configurations in row order.
    pub fn expand(&self) -> Result<Vec<RunChoice>> {
        if self.methods.is_empty() {
            return Err(CliError::Config("sweep spec lists no methods".into()));
        }
        let mut all = Vec::new();
        for entry in &self.methods {
            all.extend(entry.expand(self.zero_offset)?);
        }
        Ok(all)
    }

    /// Number of rows the sweep will produce.
    pub fn size(&self) -> Result<usize> {
        Ok(self.expand()?.len())
    }
}

fn row_for(choice: &RunChoice, metric: MetricKind) -> ResultRow {
    ResultRow {
        method: choice.method.name().into(),
        r: choice.r,
        m: choice.m,
        kernel: choice.kernel.as_ref().map(|k| k.replace('-', "_")),
        epsilon: choice.epsilon,
        lambda: if choice.method == MethodId::Pod { 0.0 } else { choice.lambda },
        normalize: choice.normalize,
        metric: metric.name().into(),
        value: None,
        train_time_s: None,
        source: "computed".into(),
        error: None,
    }
}

/// Trains and evaluates one configuration; failures go into the row.
pub fn run_choice(
    choice: &RunChoice,
    train: &SnapshotSet,
    eval: &SnapshotSet,
    pod: &PodDecomposition,
    metric: MetricKind,
) -> ResultRow {
    let mut row = row_for(choice, metric);
    let cfg = match choice.training_config() {
        Ok(c) => c,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let (trained, t) = timed(|| train_with_decomposition(train, pod, &cfg));
    row.train_time_s = Some(t.as_secs_f64());
    match trained.and_then(|mf| evaluate(metric, eval, &mf)) {
        Ok(report) => row.value = Some(report.value),
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs every configuration of `spec`, in parallel, returning rows in
/// expansion order.
pub fn run_sweep(spec: &SweepSpec, train: &SnapshotSet, eval: &SnapshotSet) -> Result<Vec<ResultRow>> {
    let choices = spec.expand()?;
    let offset = if spec.zero_offset { OffsetChoice::Zero } else { OffsetChoice::Mean };
    let pod = PodDecomposition::new(train, &offset)?;
    Ok(choices
        .par_iter()
        .map(|c| run_choice(c, train, eval, &pod, spec.metric))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub failures: usize,
    /// Lowest-error row per series (`method` or `method/kernel`).
    pub best: BTreeMap<String, ResultRow>,
}

pub fn summarize(rows: &[ResultRow]) -> SweepSummary {
    let mut best: BTreeMap<String, ResultRow> = BTreeMap::new();
    for row in rows {
        let Some(v) = row.value else { continue };
        let key = row.series();
        // Ties keep the earlier row.
        if best.get(&key).and_then(|b| b.value).is_none_or(|b| v < b) {
            best.insert(key, row.clone());
        }
    }
    SweepSummary {
        rows: rows.len(),
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        best,
    }
}
