//! Positive-definite kernels: radial basis functions, polynomial kernels,
//! feature-map kernels, and the min/range input normalization wrapper.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RbfKind {
    Gaussian,
    MaternBasic,
    MaternLinear,
    MaternQuadratic,
    InverseQuadratic,
    InverseMultiquadric,
    ThinPlateSpline,
}

impl RbfKind {
    pub const ALL: [RbfKind; 7] = [
        RbfKind::Gaussian,
        RbfKind::MaternBasic,
        RbfKind::MaternLinear,
        RbfKind::MaternQuadratic,
        RbfKind::InverseQuadratic,
        RbfKind::InverseMultiquadric,
        RbfKind::ThinPlateSpline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RbfKind::Gaussian => "gaussian",
            RbfKind::MaternBasic => "matern_basic",
            RbfKind::MaternLinear => "matern_linear",
            RbfKind::MaternQuadratic => "matern_quadratic",
            RbfKind::InverseQuadratic => "inverse_quadratic",
            RbfKind::InverseMultiquadric => "inverse_multiquadric",
            RbfKind::ThinPlateSpline => "thin_plate_spline",
        }
    }

    pub fn from_name(name: &str) -> Option<RbfKind> {
        RbfKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Thin-plate splines are only conditionally positive definite.
    pub fn is_strictly_positive_definite(self) -> bool {
        self != RbfKind::ThinPlateSpline
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfFamily {
    pub kind: RbfKind,
    pub epsilon: f64,
}

impl RbfFamily {
    pub fn new(kind: RbfKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!("shape parameter must be positive, got {epsilon}")));
        }
        Ok(RbfFamily { kind, epsilon })
    }
}

/// Radial profile ψ(r) of an RBF kernel, evaluated at the scaled distance.
pub fn rbf_psi(kind: RbfKind, r: f64) -> f64 {
    match kind {
        RbfKind::Gaussian => (-r * r).exp(),
        RbfKind::MaternBasic => (-r).exp(),
        RbfKind::MaternLinear => (1.0 + r) * (-r).exp(),
        RbfKind::MaternQuadratic => (3.0 + 3.0 * r + r * r) * (-r).exp(),
        RbfKind::InverseQuadratic => 1.0 / (1.0 + r * r),
        RbfKind::InverseMultiquadric => 1.0 / (1.0 + r * r).sqrt(),
        RbfKind::ThinPlateSpline => {
            if r == 0.0 {
                0.0
            } else {
                r * r * r.ln()
            }
        }
    }
}

/// `(c + ρ xᵀx')^ℓ`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolynomialKernel {
    pub c: f64,
    pub rho: f64,
    pub ell: u32,
}

impl PolynomialKernel {
    pub fn new(c: f64, rho: f64, ell: u32) -> Result<Self> {
        if !(c >= 0.0) || !(rho > 0.0) || ell == 0 {
            return Err(Error::InvalidInput(format!(
                "polynomial kernel needs c >= 0, rho > 0, ell >= 1 (got c={c}, rho={rho}, ell={ell})"
            )));
        }
        Ok(PolynomialKernel { c, rho, ell })
    }

    /// `c = 1`, `ρ = 1/d` for inputs of dimension `d`.
    pub fn with_defaults(d: usize, ell: u32) -> Result<Self> {
        Self::new(1.0, 1.0 / d.max(1) as f64, ell)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum FeatureMap {
    /// `[x₁², x₂x₁, x₂², x₃x₁, x₃x₂, x₃², …, xₙ²]`
    QuadraticNoDuplicates,
    /// Monomials given by their exponent vectors.
    Custom { exponents: Vec<Vec<u32>> },
}

impl FeatureMap {
    pub fn dim(&self, d: usize) -> usize {
        match self {
            FeatureMap::QuadraticNoDuplicates => d * (d + 1) / 2,
            FeatureMap::Custom { exponents } => exponents.len(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureMap::QuadraticNoDuplicates => Ok(quadratic_feature_map(x)),
            FeatureMap::Custom { exponents } => exponents
                .iter()
                .map(|e| {
                    if e.len() != x.len() {
                        return Err(Error::shape("monomial feature map", e.len(), x.len()));
                    }
                    Ok(e.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product())
                })
                .collect(),
        }
    }

    /// Column-stacked features of every column of `x`.
    pub fn apply_columns(&self, x: &Matrix) -> Result<Matrix> {
        let n_phi = self.dim(x.nrows());
        let mut out = Matrix::zeros(n_phi, x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            let phi = self.apply(col.as_slice())?;
            out.column_mut(j).copy_from_slice(&phi);
        }
        Ok(out)
    }
}

/// Quadratic monomials without duplicates, ordered by the larger index
/// first: `q_i q_j` for `i = 1..n`, `j = 1..=i`.
pub fn quadratic_feature_map(q: &[f64]) -> Vec<f64> {
    let n = q.len();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            out.push(q[i] * q[j]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum FeatureWeight {
    Identity,
    ScaledIdentity { scale: f64 },
    /// Dense symmetric positive-definite weight, row-major.
    Custom { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapKernel {
    pub feature_map: FeatureMap,
    pub weight: FeatureWeight,
}

impl FeatureMapKernel {
    pub fn new(feature_map: FeatureMap, weight: FeatureWeight) -> Result<Self> {
        match &weight {
            FeatureWeight::Identity => {}
            FeatureWeight::ScaledIdentity { scale } => {
                if !(*scale > 0.0) {
                    return Err(Error::InvalidInput(format!("weight scale must be positive, got {scale}")));
                }
            }
            FeatureWeight::Custom { matrix } => {
                let n = matrix.len();
                if matrix.iter().any(|row| row.len() != n) {
                    return Err(Error::InvalidInput("feature weight must be square".into()));
                }
                let g = Matrix::from_fn(n, n, |i, j| matrix[i][j]);
                if (&g - g.transpose()).amax() > 1e-12 * g.amax() || g.cholesky().is_none() {
                    return Err(Error::InvalidInput(
                        "feature weight must be symmetric positive definite".into(),
                    ));
                }
            }
        }
        Ok(FeatureMapKernel { feature_map, weight })
    }

    /// Quadratic map with `G = I`.
    pub fn quadratic() -> Self {
        FeatureMapKernel {
            feature_map: FeatureMap::QuadraticNoDuplicates,
            weight: FeatureWeight::Identity,
        }
    }

    /// Quadratic map with `G = I / n_φ` for latent dimension `d`.
    pub fn quadratic_scaled(d: usize) -> Self {
        FeatureMapKernel {
            feature_map: FeatureMap::QuadraticNoDuplicates,
            weight: FeatureWeight::ScaledIdentity {
                scale: 1.0 / (d * (d + 1) / 2).max(1) as f64,
            },
        }
    }

    fn weighted_inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        match &self.weight {
            FeatureWeight::Identity => Ok(dot(a, b)),
            FeatureWeight::ScaledIdentity { scale } => Ok(scale * dot(a, b)),
            FeatureWeight::Custom { matrix } => {
                if matrix.len() != a.len() {
                    return Err(Error::shape("feature weight", a.len(), matrix.len()));
                }
                Ok(matrix
                    .iter()
                    .zip(a)
                    .map(|(row, &ai)| ai * dot(row, b))
                    .sum())
            }
        }
    }
}

/// Maps each input component to `[0, 1]` using the training minimum and
/// range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub m: Vec<f64>,
    pub x_bar: Vec<f64>,
}

impl Normalizer {
    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::shape("normalizer", self.dim(), x.len()));
        }
        Ok(x.iter()
            .zip(self.x_bar.iter().zip(&self.m))
            .map(|(&xi, (&lo, &range))| (xi - lo) / range)
            .collect())
    }

    pub fn apply_columns(&self, x: &Matrix) -> Result<Matrix> {
        if x.nrows() != self.dim() {
            return Err(Error::shape("normalizer", self.dim(), x.nrows()));
        }
        Ok(Matrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.x_bar[i]) / self.m[i]
        }))
    }
}

/// Fits the normalizer on a `d × M` input matrix. Constant rows get a unit
/// range so they map to zero.
pub fn fit_normalizer(inputs: &Matrix) -> Result<Normalizer> {
    if inputs.ncols() == 0 || inputs.nrows() == 0 {
        return Err(Error::InvalidInput("cannot fit normalizer on empty inputs".into()));
    }
    let mut m = Vec::with_capacity(inputs.nrows());
    let mut x_bar = Vec::with_capacity(inputs.nrows());
    for row in inputs.row_iter() {
        let lo = row.min();
        let hi = row.max();
        let range = hi - lo;
        m.push(if range > 0.0 { range } else { 1.0 });
        x_bar.push(lo);
    }
    Ok(Normalizer { m, x_bar })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum KernelBase {
    Rbf(RbfFamily),
    Polynomial(PolynomialKernel),
    FeatureMap(FeatureMapKernel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub base: KernelBase,
    pub normalizer: Option<Normalizer>,
}

impl KernelSpec {
    pub fn new(base: KernelBase) -> Self {
        KernelSpec { base, normalizer: None }
    }

    pub fn rbf(kind: RbfKind, epsilon: f64) -> Result<Self> {
        Ok(Self::new(KernelBase::Rbf(RbfFamily::new(kind, epsilon)?)))
    }

    pub fn with_normalizer(mut self, normalizer: Normalizer) -> Self {
        self.normalizer = Some(normalizer);
        self
    }

    pub fn is_strictly_positive_definite(&self) -> bool {
        match &self.base {
            KernelBase::Rbf(f) => f.kind.is_strictly_positive_definite(),
            // Polynomial and feature-map kernels have finite rank.
            KernelBase::Polynomial(_) | KernelBase::FeatureMap(_) => false,
        }
    }

    /// Short human-readable identifier used in reports.
    pub fn label(&self) -> String {
        match &self.base {
            KernelBase::Rbf(f) => f.kind.name().to_string(),
            KernelBase::Polynomial(p) => format!("polynomial{}", p.ell),
            KernelBase::FeatureMap(fm) => match fm.feature_map {
                FeatureMap::QuadraticNoDuplicates => "quadratic_feature_map".to_string(),
                FeatureMap::Custom { .. } => "custom_feature_map".to_string(),
            },
        }
    }

    /// Normalizes `x` if a normalizer is attached.
    pub fn prepare(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.normalizer {
            Some(nrm) => nrm.apply(x),
            None => Ok(x.to_vec()),
        }
    }

    pub fn prepare_columns(&self, x: &Matrix) -> Result<Matrix> {
        match &self.normalizer {
            Some(nrm) => nrm.apply_columns(x),
            None => Ok(x.clone()),
        }
    }

    /// `K(x, y)`, normalizing both arguments first when configured.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::shape("kernel eval", x.len(), y.len()));
        }
        let xn = self.prepare(x)?;
        let yn = self.prepare(y)?;
        self.eval_prepared(&xn, &yn)
    }

    /// Evaluates the base kernel on already-normalized inputs. Arguments are
    /// put in a canonical order so the result is bitwise symmetric.
    pub fn eval_prepared(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let (a, b) = match lex_cmp(x, y) {
            Ordering::Greater => (y, x),
            _ => (x, y),
        };
        match &self.base {
            KernelBase::Rbf(f) => {
                let dist = a
                    .iter()
                    .zip(b)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
                Ok(rbf_psi(f.kind, f.epsilon * dist))
            }
            KernelBase::Polynomial(p) => Ok((p.c + p.rho * dot(a, b)).powi(p.ell as i32)),
            KernelBase::FeatureMap(fm) => {
                let pa = fm.feature_map.apply(a)?;
                let pb = fm.feature_map.apply(b)?;
                fm.weighted_inner(&pa, &pb)
            }
        }
    }

    /// Gram matrix `K(X, X)` over the columns of `x`.
    pub fn gram(&self, x: &Matrix) -> Result<Matrix> {
        let xn = self.prepare_columns(x)?;
        self.gram_prepared(&xn)
    }

    /// Gram matrix on already-normalized columns. Only the upper triangle is
    /// evaluated; the lower triangle is mirrored.
    pub fn gram_prepared(&self, x: &Matrix) -> Result<Matrix> {
        let n = x.ncols();
        let cols: Vec<&[f64]> = (0..n).map(|j| column_slice(x, j)).collect();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                (0..=j)
                    .map(|i| self.eval_prepared(cols[i], cols[j]))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let mut g = Matrix::zeros(n, n);
        for (j, col) in upper.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// `[K(x₁, query), …, K(xₙ, query)]ᵀ`
    pub fn kernel_vector(&self, x: &Matrix, query: &[f64]) -> Result<Vector> {
        if query.len() != x.nrows() {
            return Err(Error::shape("kernel_vector", x.nrows(), query.len()));
        }
        let xn = self.prepare_columns(x)?;
        let qn = self.prepare(query)?;
        self.kernel_vector_prepared(&xn, &qn)
    }

    pub fn kernel_vector_prepared(&self, x: &Matrix, query: &[f64]) -> Result<Vector> {
        if query.len() != x.nrows() {
            return Err(Error::shape("kernel_vector", x.nrows(), query.len()));
        }
        let vals = (0..x.ncols())
            .map(|j| self.eval_prepared(column_slice(x, j), query))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Vector::from_vec(vals))
    }

    /// Cross-kernel matrix `K(X, Y)` with entry `(i, j) = K(xᵢ, yⱼ)`, both
    /// already normalized.
    pub fn cross_prepared(&self, x: &Matrix, y: &Matrix) -> Result<Matrix> {
        if x.nrows() != y.nrows() {
            return Err(Error::shape("cross kernel", x.nrows(), y.nrows()));
        }
        let cols: Vec<Vector> = (0..y.ncols())
            .into_par_iter()
            .map(|j| self.kernel_vector_prepared(x, column_slice(y, j)))
            .collect::<Result<_>>()?;
        Ok(Matrix::from_columns(&cols))
    }
}

fn column_slice(x: &Matrix, j: usize) -> &[f64] {
    let n = x.nrows();
    &x.as_slice()[j * n..(j + 1) * n]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}
