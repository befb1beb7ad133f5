//! Dense linear algebra used throughout the crate: a deterministic thin SVD
//! and symmetric positive (semi)definite solves.
//!
//! Matrices are column-major `nalgebra` matrices; snapshots are columns.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{svd, svd_scratch, ComputeSvdVectors};
use faer::diag::Diag;
use faer::{Mat, MatRef, Par};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Returns an error if any entry of `a` is NaN or infinite.
pub fn ensure_finite(a: &Matrix, context: &'static str) -> Result<()> {
    if let Some(idx) = a.iter().position(|x| !x.is_finite()) {
        let (i, j) = (idx % a.nrows(), idx / a.nrows());
        return Err(Error::InvalidInput(format!(
            "{context}: non-finite entry at ({i}, {j})"
        )));
    }
    Ok(())
}

/// Thin singular value decomposition `a = u * diag(singular_values) * vt`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub vt: Matrix,
}

impl ThinSvd {
    pub fn rank_k_approximation(&self, k: usize) -> Matrix {
        let k = k.min(self.singular_values.len());
        let mut us = self.u.columns(0, k).into_owned();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.singular_values[j];
        }
        us * self.vt.rows(0, k)
    }
}

/// Deterministic thin SVD. Runs single-threaded so results do not depend on
/// the host's core count.
pub fn thin_svd(a: &Matrix) -> Result<ThinSvd> {
    let (n, m) = a.shape();
    if n == 0 || m == 0 {
        return Err(Error::shape("thin_svd", "nonempty matrix", format!("{n}x{m}")));
    }
    ensure_finite(a, "thin_svd")?;
    let k = n.min(m);
    let view = MatRef::from_column_major_slice(a.as_slice(), n, m);
    let mut u = Mat::<f64>::zeros(n, k);
    let mut v = Mat::<f64>::zeros(m, k);
    let mut s = Diag::<f64>::zeros(k);
    let par = Par::Seq;
    let scratch = svd_scratch::<f64>(
        n,
        m,
        ComputeSvdVectors::Thin,
        ComputeSvdVectors::Thin,
        par,
        Default::default(),
    );
    svd(
        view,
        s.as_mut(),
        Some(u.as_mut()),
        Some(v.as_mut()),
        par,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    )
    .map_err(|_| Error::ConvergenceFailure)?;

    let sv = s.column_vector();
    let singular_values: Vec<f64> = (0..k).map(|j| sv[j].max(0.0)).collect();
    let u = Matrix::from_fn(n, k, |i, j| u[(i, j)]);
    let vt = Matrix::from_fn(k, m, |i, j| v[(j, i)]);
    Ok(ThinSvd {
        u,
        singular_values,
        vt,
    })
}

/// What to do when the symmetric factorization of a nearly singular system
/// breaks down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "magnitude")]
pub enum JitterPolicy {
    Fail,
    /// Retry with `a + delta * I`, `delta = magnitude * trace(a) / n`,
    /// escalating `delta` by 10x up to three times.
    Jitter(f64),
}

impl JitterPolicy {
    pub const KERNEL_DEFAULT: JitterPolicy = JitterPolicy::Jitter(1e-14);
}

const JITTER_ESCALATIONS: usize = 3;
const SYMMETRY_TOL: f64 = 1e-12;

/// Solves `a x = b` for symmetric positive (semi)definite `a` with a
/// Cholesky factorization.
pub fn solve_spd(a: &Matrix, b: &Matrix, policy: JitterPolicy) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::shape("solve_spd", "square matrix", format!("{}x{}", n, a.ncols())));
    }
    if b.nrows() != n {
        return Err(Error::shape("solve_spd", format!("{n} rhs rows"), b.nrows()));
    }
    ensure_finite(a, "solve_spd")?;
    ensure_finite(b, "solve_spd")?;

    let scale = a.amax();
    for j in 0..n {
        for i in 0..j {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidInput(format!(
                    "solve_spd: matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    if let Some(chol) = factor(a.clone()) {
        return Ok(chol.solve(b));
    }
    match policy {
        JitterPolicy::Fail => Err(Error::SingularSystem(format!(
            "Cholesky factorization of {n}x{n} system failed"
        ))),
        JitterPolicy::Jitter(magnitude) => {
            let mut delta = magnitude * a.trace() / n as f64;
            if !(delta > 0.0) {
                delta = magnitude.max(f64::MIN_POSITIVE);
            }
            for attempt in 0..=JITTER_ESCALATIONS {
                let mut shifted = a.clone();
                for i in 0..n {
                    shifted[(i, i)] += delta;
                }
                if let Some(chol) = factor(shifted) {
                    log::warn!("solve_spd: factorization succeeded after jitter {delta:e} (attempt {attempt})");
                    return Ok(chol.solve(b));
                }
                delta *= 10.0;
            }
            Err(Error::SingularSystem(format!(
                "Cholesky factorization failed after {} jitter escalations",
                JITTER_ESCALATIONS
            )))
        }
    }
}

fn factor(a: Matrix) -> Option<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(a)?;
    // nalgebra accepts tiny positive pivots; a zero or denormal pivot still
    // leaves an unusable factor.
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    if min_pivot.is_finite() && min_pivot > 0.0 && min_pivot.is_normal() {
        Some(chol)
    } else {
        None
    }
}
