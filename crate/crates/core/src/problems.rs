//! Snapshot generators: an analytic surface-heating field over a cone and a
//! finite-difference advection-diffusion-reaction solver on the unit square.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::pod::{SnapshotLabel, SnapshotSet};

/// Train/test pair produced by a generator.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: SnapshotSet,
    pub test: SnapshotSet,
}

/// `n` equispaced points on `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// `n` logarithmically spaced points on `[a, b]`, endpoints included.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.log10(), b.log10(), n)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

// ---------------------------------------------------------------------------
// Surface heating
// ---------------------------------------------------------------------------

/// Sigmoid steepened to approximate a unit step: `1 / (1 + e^{-100x})`.
pub fn sigmoid_sharp(x: f64) -> f64 {
    let exponent = (-100.0 * x).clamp(-700.0, 700.0);
    1.0 / (1.0 + exponent.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceHeatingConfig {
    /// Axial grid points on `z ∈ [0, 2]`.
    pub nz: usize,
    /// Circumferential grid points on `θ ∈ [0, 2π]`.
    pub ntheta: usize,
    /// Angle of attack in radians, within ±10°.
    pub mu1: f64,
    /// Transition location, within `[0.4, 0.8]`.
    pub mu2: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    1e-6
}

const MU1_MAX_DEG: f64 = 10.0;
const MU2_RANGE: (f64, f64) = (0.4, 0.8);

impl SurfaceHeatingConfig {
    fn validate(&self) -> Result<()> {
        if self.nz < 2 || self.ntheta < 2 {
            return Err(Error::InvalidInput("surface heating grids need at least 2 points".into()));
        }
        let mu1_max = MU1_MAX_DEG.to_radians() * (1.0 + 1e-12);
        if !(self.mu1.abs() <= mu1_max) {
            return Err(Error::InvalidInput(format!("mu1 = {} rad outside ±10°", self.mu1)));
        }
        if !(self.mu2 >= MU2_RANGE.0 - 1e-12 && self.mu2 <= MU2_RANGE.1 + 1e-12) {
            return Err(Error::InvalidInput(format!("mu2 = {} outside [0.4, 0.8]", self.mu2)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidInput("delta must be positive".into()));
        }
        Ok(())
    }
}

/// Pointwise heating field `s(z, θ; μ)`.
pub fn surface_heating_point(z: f64, theta: f64, mu1: f64, mu2: f64, delta: f64) -> f64 {
    let pitch = mu1.sin() * theta.sin();
    let modulation = 1.0 - 5.0 * pitch;
    100.0 * modulation / (1.0 + 20.0 * z).powi(2)
        + 50.0 * sigmoid_sharp(z - mu2 * (1.0 + 2.0 * pitch))
        - 50.0 * sigmoid_sharp(z - 1.2)
        + 75.0 * sigmoid_sharp(z - 1.6) * modulation / (delta + z)
        + 50.0
}

/// Field on the uniform `(z, θ)` grid, flattened with `z` fastest:
/// entry `iz + nz * itheta`.
pub fn surface_heating_field(cfg: &SurfaceHeatingConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok(field_unchecked(cfg))
}

fn field_unchecked(cfg: &SurfaceHeatingConfig) -> Vec<f64> {
    let zs = linspace(0.0, 2.0, cfg.nz);
    let thetas = linspace(0.0, 2.0 * PI, cfg.ntheta);
    let mut out = Vec::with_capacity(cfg.nz * cfg.ntheta);
    for &theta in &thetas {
        for &z in &zs {
            out.push(surface_heating_point(z, theta, cfg.mu1, cfg.mu2, cfg.delta));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceHeatingDatasetConfig {
    pub nz: usize,
    pub ntheta: usize,
    /// Number of equispaced angle-of-attack values over ±10°.
    pub n_mu1: usize,
    /// Number of equispaced transition values over `[0.4, 0.8]`.
    pub n_mu2: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl SurfaceHeatingDatasetConfig {
    /// 100×100 spatial grid, 50×50 parameter grid.
    pub fn full_scale() -> Self {
        SurfaceHeatingDatasetConfig {
            nz: 100,
            ntheta: 100,
            n_mu1: 50,
            n_mu2: 50,
            delta: 1e-6,
        }
    }

    pub fn desk_scale() -> Self {
        SurfaceHeatingDatasetConfig {
            nz: 40,
            ntheta: 40,
            n_mu1: 20,
            n_mu2: 20,
            delta: 1e-6,
        }
    }

    /// Parameter pairs `(μ₁ [rad], μ₂)` in column order: `μ₂` fastest.
    pub fn parameters(&self) -> Vec<(f64, f64)> {
        let mu1s = linspace(-MU1_MAX_DEG, MU1_MAX_DEG, self.n_mu1);
        let mu2s = linspace(MU2_RANGE.0, MU2_RANGE.1, self.n_mu2);
        mu1s.iter()
            .flat_map(|&a| mu2s.iter().map(move |&b| (a.to_radians(), b)))
            .collect()
    }
}

/// Unscaled snapshot matrix `Q⁰` with one column per parameter pair.
pub fn surface_heating_matrix(cfg: &SurfaceHeatingDatasetConfig) -> Result<(Matrix, Vec<(f64, f64)>)> {
    if cfg.n_mu1 < 1 || cfg.n_mu2 < 1 || cfg.n_mu1 * cfg.n_mu2 < 4 {
        return Err(Error::InvalidInput("parameter grid needs at least 4 points".into()));
    }
    let params = cfg.parameters();
    let n = cfg.nz * cfg.ntheta;
    let columns: Vec<Vec<f64>> = params
        .par_iter()
        .map(|&(mu1, mu2)| {
            surface_heating_field(&SurfaceHeatingConfig {
                nz: cfg.nz,
                ntheta: cfg.ntheta,
                mu1,
                mu2,
                delta: cfg.delta,
            })
        })
        .collect::<Result<_>>()?;
    let mut q = Matrix::zeros(n, params.len());
    for (j, col) in columns.into_iter().enumerate() {
        q.column_mut(j).copy_from_slice(&col);
    }
    Ok((q, params))
}

/// Generates, scales by the global range, and splits alternating columns:
/// even (0-based) indices train, odd indices test.
pub fn surface_heating_dataset(cfg: &SurfaceHeatingDatasetConfig) -> Result<SplitDataset> {
    let (q0, params) = surface_heating_matrix(cfg)?;
    let range = q0.max() - q0.min();
    if !(range > 0.0) {
        return Err(Error::InvalidInput("surface heating data has zero range".into()));
    }
    let labels: Vec<SnapshotLabel> = params
        .iter()
        .map(|&(a, b)| SnapshotLabel {
            params: vec![a, b],
            time_index: None,
        })
        .collect();
    let split = |parity: usize| -> Result<SnapshotSet> {
        let idx: Vec<usize> = (0..q0.ncols()).filter(|j| j % 2 == parity).collect();
        let mut states = q0.select_columns(&idx);
        states.apply(|x| *x /= range);
        SnapshotSet::new(states)?
            .with_recorded_scaling(Some(1.0 / range))
            .with_labels(idx.iter().map(|&j| labels[j].clone()).collect())
    };
    Ok(SplitDataset {
        train: split(0)?,
        test: split(1)?,
    })
}

// ---------------------------------------------------------------------------
// Advection-diffusion-reaction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvDiffConfig {
    /// Interior grid points per axis; the state dimension is its square.
    pub n_per_axis: usize,
    pub alpha: f64,
    pub beta: [f64; 2],
    pub gamma: f64,
    pub forcing: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl AdvDiffConfig {
    /// `β = ½(cos π/3, sin π/3)`, `γ = 1`, `f = 1`, `T = 5`, `Δt = 0.01`.
    pub fn reference(n_per_axis: usize, alpha: f64) -> Self {
        AdvDiffConfig {
            n_per_axis,
            alpha,
            beta: [0.5 * (PI / 3.0).cos(), 0.5 * (PI / 3.0).sin()],
            gamma: 1.0,
            forcing: 1.0,
            t_final: 5.0,
            dt: 0.01,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n_per_axis + 1) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n_per_axis < 1 {
            return Err(Error::InvalidInput("n_per_axis must be at least 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidInput("alpha must be positive".into()));
        }
        if self.beta.iter().any(|b| !(*b >= 0.0)) || !(self.gamma >= 0.0) {
            return Err(Error::InvalidInput("beta and gamma must be nonnegative".into()));
        }
        if !(self.dt > 0.0) || !(self.t_final >= self.dt) {
            return Err(Error::InvalidInput("need dt > 0 and t_final >= dt".into()));
        }
        if !self.forcing.is_finite() {
            return Err(Error::InvalidInput("forcing must be finite".into()));
        }
        Ok(())
    }
}

/// Semi-discrete operator `dq/dt = A q + F` on interior nodes, flattened
/// with `x` fastest (`k = i + n j`). Diffusion uses centered differences,
/// advection first-order backward (upwind for `β ≥ 0`) differences, and the
/// homogeneous Dirichlet boundary drops out.
#[derive(Debug, Clone)]
pub struct AdvDiffOperator {
    pub n_per_axis: usize,
    /// `(row, col, value)` entries of `A`.
    pub entries: Vec<(usize, usize, f64)>,
    pub forcing: Vec<f64>,
}

impl AdvDiffOperator {
    pub fn assemble(cfg: &AdvDiffConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_per_axis;
        let h = cfg.spacing();
        let diff = cfg.alpha / (h * h);
        let [bx, by] = cfg.beta;
        let center = -(4.0 * diff + (bx + by) / h + cfg.gamma);
        let west = diff + bx / h;
        let south = diff + by / h;
        let east = diff;
        let north = diff;

        let mut entries = Vec::with_capacity(5 * n * n);
        for j in 0..n {
            for i in 0..n {
                let k = i + n * j;
                if j > 0 {
                    entries.push((k, k - n, south));
                }
                if i > 0 {
                    entries.push((k, k - 1, west));
                }
                entries.push((k, k, center));
                if i + 1 < n {
                    entries.push((k, k + 1, east));
                }
                if j + 1 < n {
                    entries.push((k, k + n, north));
                }
            }
        }
        Ok(AdvDiffOperator {
            n_per_axis: n,
            entries,
            forcing: vec![cfg.forcing; n * n],
        })
    }

    pub fn dim(&self) -> usize {
        self.n_per_axis * self.n_per_axis
    }

    /// `A q`
    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for &(r, c, v) in &self.entries {
            out[r] += v * q[c];
        }
        out
    }

    /// `A q + F`
    pub fn residual(&self, q: &[f64]) -> Vec<f64> {
        let mut out = self.apply(q);
        for (o, f) in out.iter_mut().zip(&self.forcing) {
            *o += f;
        }
        out
    }
}

const DIVERGENCE_LIMIT: f64 = 1e12;

/// Integrates from the zero state with implicit Euler and returns every
/// step including `t = 0`.
pub fn advdiff_simulate(cfg: &AdvDiffConfig) -> Result<SnapshotSet> {
    let op = AdvDiffOperator::assemble(cfg)?;
    let n = op.dim();
    let steps = cfg.n_steps();

    // (I − Δt A) q_{k+1} = q_k + Δt F
    let triplets: Vec<Triplet<usize, usize, f64>> = op
        .entries
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, if r == c { 1.0 - cfg.dt * v } else { -cfg.dt * v }))
        .collect();
    let system = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::InvalidInput(format!("operator assembly failed: {e:?}")))?;
    let lu = system
        .sp_lu()
        .map_err(|e| Error::SingularSystem(format!("implicit Euler matrix: {e:?}")))?;

    let mut states = Matrix::zeros(n, steps + 1);
    let mut q = Mat::<f64>::zeros(n, 1);
    for step in 1..=steps {
        for i in 0..n {
            q[(i, 0)] += cfg.dt * op.forcing[i];
        }
        lu.solve_in_place(q.as_mut());
        let norm = (0..n).map(|i| q[(i, 0)] * q[(i, 0)]).sum::<f64>().sqrt();
        if !(norm <= DIVERGENCE_LIMIT) {
            return Err(Error::SolverDiverged { step, norm });
        }
        for i in 0..n {
            states[(i, step)] = q[(i, 0)];
        }
    }
    let labels = (0..=steps)
        .map(|t| SnapshotLabel {
            params: vec![cfg.alpha],
            time_index: Some(t),
        })
        .collect();
    SnapshotSet::new(states)?.with_labels(labels)
}

/// Concatenates trajectories for each diffusion value, in the given order.
pub fn advdiff_dataset(alphas: &[f64], template: &AdvDiffConfig) -> Result<SnapshotSet> {
    if alphas.is_empty() {
        return Err(Error::InvalidInput("need at least one diffusion value".into()));
    }
    let runs: Vec<SnapshotSet> = alphas
        .par_iter()
        .map(|&alpha| {
            advdiff_simulate(&AdvDiffConfig {
                alpha,
                ..template.clone()
            })
        })
        .collect::<Result<_>>()?;
    let n = runs[0].dim();
    let total: usize = runs.iter().map(|r| r.len()).sum();
    let mut states = Matrix::zeros(n, total);
    let mut labels = Vec::with_capacity(total);
    let mut offset = 0;
    for run in &runs {
        states.columns_mut(offset, run.len()).copy_from(run.states());
        labels.extend_from_slice(run.labels().unwrap_or_default());
        offset += run.len();
    }
    SnapshotSet::new(states)?.with_labels(labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvDiffDatasetConfig {
    pub n_per_axis: usize,
    /// Number of log-spaced training diffusion values.
    pub n_train_alphas: usize,
    pub alpha_range: [f64; 2],
    pub test_alpha: f64,
    pub beta: [f64; 2],
    pub gamma: f64,
    pub forcing: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl AdvDiffDatasetConfig {
    /// 64×64 grid, four training diffusion values, 100 steps to `T = 5`.
    pub fn desk_scale() -> Self {
        let base = AdvDiffConfig::reference(64, 1e-3);
        AdvDiffDatasetConfig {
            n_per_axis: 64,
            n_train_alphas: 4,
            alpha_range: [1e-6, 1e-1],
            test_alpha: 1e-3,
            beta: base.beta,
            gamma: base.gamma,
            forcing: base.forcing,
            t_final: 5.0,
            dt: 0.05,
        }
    }

    /// 256×256 grid, ten training diffusion values, `Δt = 0.01`.
    pub fn full_scale() -> Self {
        AdvDiffDatasetConfig {
            n_per_axis: 256,
            n_train_alphas: 10,
            dt: 0.01,
            ..Self::desk_scale()
        }
    }

    pub fn train_alphas(&self) -> Vec<f64> {
        logspace(self.alpha_range[0], self.alpha_range[1], self.n_train_alphas)
    }

    pub fn template(&self) -> AdvDiffConfig {
        AdvDiffConfig {
            n_per_axis: self.n_per_axis,
            alpha: self.test_alpha,
            beta: self.beta,
            gamma: self.gamma,
            forcing: self.forcing,
            t_final: self.t_final,
            dt: self.dt,
        }
    }
}

pub fn advdiff_split_dataset(cfg: &AdvDiffDatasetConfig) -> Result<SplitDataset> {
    let alphas = cfg.train_alphas();
    if alphas.contains(&cfg.test_alpha) {
        return Err(Error::InvalidInput("test diffusion value coincides with a training value".into()));
    }
    let template = cfg.template();
    Ok(SplitDataset {
        train: advdiff_dataset(&alphas, &template)?,
        test: advdiff_simulate(&template)?,
    })
}
