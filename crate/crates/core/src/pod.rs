//! Proper orthogonal decomposition: snapshot shifting, truncated and
//! augmenting bases, the energy criterion, and the affine encoder/decoder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ensure_finite, thin_svd, Matrix, Vector};

/// Per-column metadata attached to a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotLabel {
    /// Parameter values that produced the snapshot.
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_index: Option<usize>,
}

/// Column-stacked high-dimensional states.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    states: Matrix,
    labels: Option<Vec<SnapshotLabel>>,
    scaling: Option<f64>,
}

impl SnapshotSet {
    pub fn new(states: Matrix) -> Result<Self> {
        if states.ncols() < 2 || states.nrows() < 1 {
            return Err(Error::InvalidInput(format!(
                "snapshot set needs at least one row and two columns, got {}x{}",
                states.nrows(),
                states.ncols()
            )));
        }
        ensure_finite(&states, "snapshot set")?;
        Ok(SnapshotSet {
            states,
            labels: None,
            scaling: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<SnapshotLabel>) -> Result<Self> {
        if labels.len() != self.states.ncols() {
            return Err(Error::shape("snapshot labels", self.states.ncols(), labels.len()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Multiplies every entry by `factor` and records it.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor == 0.0 {
            return Err(Error::InvalidInput(format!("invalid scaling factor {factor}")));
        }
        self.states *= factor;
        self.scaling = Some(self.scaling.unwrap_or(1.0) * factor);
        Ok(self)
    }

    /// Records that the stored entries were already multiplied by `scaling`.
    pub fn with_recorded_scaling(mut self, scaling: Option<f64>) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn states(&self) -> &Matrix {
        &self.states
    }

    pub fn labels(&self) -> Option<&[SnapshotLabel]> {
        self.labels.as_deref()
    }

    pub fn scaling(&self) -> Option<f64> {
        self.scaling
    }

    /// State dimension N.
    pub fn dim(&self) -> usize {
        self.states.nrows()
    }

    /// Number of snapshots M.
    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Selects columns by index, keeping labels and scaling.
    pub fn select_columns(&self, indices: &[usize]) -> Result<SnapshotSet> {
        let states = self.states.select_columns(indices);
        let mut set = SnapshotSet::new(states)?.with_recorded_scaling(self.scaling);
        if let Some(labels) = &self.labels {
            set.labels = Some(indices.iter().map(|&i| labels[i].clone()).collect());
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "vector")]
pub enum OffsetChoice {
    Mean,
    Zero,
    Custom(Vec<f64>),
}

/// Returns the shifted snapshots `Q - q̄ 1ᵀ` together with the offset `q̄`.
pub fn shift(snapshots: &SnapshotSet, offset: &OffsetChoice) -> Result<(Matrix, Vector)> {
    let q = snapshots.states();
    let n = q.nrows();
    let q_bar = match offset {
        OffsetChoice::Mean => q.column_mean(),
        OffsetChoice::Zero => Vector::zeros(n),
        OffsetChoice::Custom(v) => {
            if v.len() != n {
                return Err(Error::shape("custom offset", n, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("custom offset has non-finite entries".into()));
            }
            Vector::from_column_slice(v)
        }
    };
    let mut shifted = q.clone();
    for mut col in shifted.column_iter_mut() {
        col -= &q_bar;
    }
    Ok((shifted, q_bar))
}

/// Affine POD basis: offset, leading modes `v`, augmenting modes `v_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    pub offset: Vector,
    pub v: Matrix,
    pub v_bar: Matrix,
    /// Every singular value of the shifted training data.
    pub singular_values: Vec<f64>,
}

impl PodBasis {
    pub fn r(&self) -> usize {
        self.v.ncols()
    }

    pub fn m(&self) -> usize {
        self.v_bar.ncols()
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    fn check_state(&self, q: &Vector, context: &'static str) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::shape(context, self.dim(), q.len()));
        }
        Ok(())
    }

    /// `Vᵀ(q − q̄)`
    pub fn encode(&self, q: &Vector) -> Result<Vector> {
        self.check_state(q, "encode")?;
        Ok(self.v.tr_mul(&(q - &self.offset)))
    }

    /// `V̄ᵀ(q − q̄)`
    pub fn project_high(&self, q: &Vector) -> Result<Vector> {
        self.check_state(q, "project_high")?;
        Ok(self.v_bar.tr_mul(&(q - &self.offset)))
    }

    /// `q̄ + V q̂`
    pub fn decode_affine(&self, q_hat: &Vector) -> Result<Vector> {
        if q_hat.len() != self.r() {
            return Err(Error::shape("decode_affine", self.r(), q_hat.len()));
        }
        Ok(&self.offset + &self.v * q_hat)
    }

    /// Column-wise `encode` of a state matrix.
    pub fn encode_all(&self, states: &Matrix) -> Result<Matrix> {
        self.project_all(states, &self.v, "encode_all")
    }

    /// Column-wise `project_high` of a state matrix.
    pub fn project_high_all(&self, states: &Matrix) -> Result<Matrix> {
        self.project_all(states, &self.v_bar, "project_high_all")
    }

    fn project_all(&self, states: &Matrix, basis: &Matrix, context: &'static str) -> Result<Matrix> {
        if states.nrows() != self.dim() {
            return Err(Error::shape(context, self.dim(), states.nrows()));
        }
        let mut shifted = states.clone();
        for mut col in shifted.column_iter_mut() {
            col -= &self.offset;
        }
        Ok(basis.tr_mul(&shifted))
    }
}

/// Shifted-snapshot SVD, computed once and truncated on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct PodDecomposition {
    pub offset_choice: OffsetChoice,
    pub offset: Vector,
    /// Sign-normalized left singular vectors, `N × min(N, M)`.
    pub modes: Matrix,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    n_snapshots: usize,
}

impl PodDecomposition {
    pub fn new(snapshots: &SnapshotSet, offset: &OffsetChoice) -> Result<Self> {
        let (shifted, q_bar) = shift(snapshots, offset)?;
        let mut svd = thin_svd(&shifted)?;
        normalize_signs(&mut svd.u);
        let rank = numerical_rank(&svd.singular_values, snapshots.dim().max(snapshots.len()));
        Ok(PodDecomposition {
            offset_choice: offset.clone(),
            offset: q_bar,
            modes: svd.u,
            singular_values: svd.singular_values,
            rank,
            n_snapshots: snapshots.len(),
        })
    }

    /// Basis with `r` leading and `m` augmenting modes.
    ///
    /// If `r + m` exceeds the numerical rank, the augmenting basis is
    /// truncated with a warning. Fails with `RankDeficient` only when even
    /// the `r` leading modes are not supported by the data.
    pub fn basis(&self, r: usize, m: usize) -> Result<PodBasis> {
        if r == 0 {
            return Err(Error::InvalidInput("basis size r must be at least 1".into()));
        }
        let bound = self.offset.len().min(self.n_snapshots);
        if r + m > bound {
            return Err(Error::InvalidInput(format!(
                "r + m = {} exceeds min(N, M) = {bound}",
                r + m
            )));
        }
        let rank = self.rank;
        if r > rank {
            return Err(Error::RankDeficient { requested: r, rank });
        }
        let m_eff = if r + m > rank {
            log::warn!(
                "requested r + m = {} modes but numerical rank is {rank}; truncating m to {}",
                r + m,
                rank - r
            );
            rank - r
        } else {
            m
        };
        Ok(PodBasis {
            offset: self.offset.clone(),
            v: self.modes.columns(0, r).into_owned(),
            v_bar: self.modes.columns(r, m_eff).into_owned(),
            singular_values: self.singular_values.clone(),
        })
    }
}

/// Builds a POD basis with `r` leading and `m` augmenting modes; see
/// [`PodDecomposition::basis`].
pub fn build_basis(snapshots: &SnapshotSet, offset: &OffsetChoice, r: usize, m: usize) -> Result<PodBasis> {
    if r == 0 {
        return Err(Error::InvalidInput("basis size r must be at least 1".into()));
    }
    let bound = snapshots.dim().min(snapshots.len());
    if r + m > bound {
        return Err(Error::InvalidInput(format!(
            "r + m = {} exceeds min(N, M) = {bound}",
            r + m
        )));
    }
    PodDecomposition::new(snapshots, offset)?.basis(r, m)
}

/// Count of singular values above `σ₁ · max(N, M) · ε`.
pub fn numerical_rank(singular_values: &[f64], max_dim: usize) -> usize {
    let Some(&s1) = singular_values.first() else {
        return 0;
    };
    let tol = s1 * max_dim as f64 * f64::EPSILON;
    singular_values.iter().take_while(|&&s| s > tol && s > 0.0).count()
}

/// Flips each column so that its entry of largest magnitude is nonnegative.
fn normalize_signs(u: &mut Matrix) {
    for mut col in u.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &x in col.iter() {
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Smallest mode count whose discarded squared singular-value energy is at
/// most a fraction `nu` of the total.
pub fn energy_criterion(singular_values: &[f64], nu: f64) -> Result<usize> {
    if !(nu >= 0.0) {
        return Err(Error::Unreachable(nu));
    }
    if singular_values.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidInput("singular values must be nonnegative".into()));
    }
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("at least one singular value must be positive".into()));
    }
    // Suffix sums give the discarded energy without cancellation.
    let mut tail = vec![0.0; singular_values.len() + 1];
    for j in (0..singular_values.len()).rev() {
        tail[j] = tail[j + 1] + singular_values[j] * singular_values[j];
    }
    (1..=singular_values.len())
        .find(|&k| tail[k] / total <= nu)
        .ok_or(Error::Unreachable(nu))
}
