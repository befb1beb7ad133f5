//! Projection-error metrics and wall-clock timing.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::TrainedManifold;
use crate::numerics::Matrix;
use crate::pod::SnapshotSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// `(Σ‖qⱼ − g(h(qⱼ))‖² / Σ‖qⱼ‖²)^{1/2}`
    RelL2Trajectory,
    /// `(1/M) Σ ‖qⱼ − g(h(qⱼ))‖₂ / ‖qⱼ‖₂`
    MeanRelL2,
    /// `maxⱼ ‖qⱼ − g(h(qⱼ))‖₁ / maxⱼ ‖qⱼ‖₁`
    RelL1Max,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::RelL2Trajectory, MetricKind::MeanRelL2, MetricKind::RelL1Max];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::RelL2Trajectory => "rel_l2_trajectory",
            MetricKind::MeanRelL2 => "mean_rel_l2",
            MetricKind::RelL1Max => "rel_l1_max",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let norm = name.replace('-', "_");
        MetricKind::ALL.into_iter().find(|m| m.name() == norm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub metric: MetricKind,
    pub value: f64,
    /// Per-column contributions, normalized the same way as `value`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_snapshot: Option<Vec<f64>>,
}

/// Evaluates `metric` on precomputed reconstructions.
pub fn evaluate_reconstruction(metric: MetricKind, truth: &Matrix, reconstruction: &Matrix) -> Result<ErrorReport> {
    if truth.shape() != reconstruction.shape() {
        return Err(Error::shape(
            "metric inputs",
            format!("{:?}", truth.shape()),
            format!("{:?}", reconstruction.shape()),
        ));
    }
    let residual = truth - reconstruction;
    match metric {
        MetricKind::RelL2Trajectory => {
            let denom = truth.norm_squared();
            if !(denom > 0.0) {
                return Err(Error::ZeroDenominator { column: None });
            }
            let scale = denom.sqrt();
            let per: Vec<f64> = residual.column_iter().map(|c| c.norm() / scale).collect();
            Ok(ErrorReport {
                metric,
                value: (residual.norm_squared() / denom).sqrt(),
                per_snapshot: Some(per),
            })
        }
        MetricKind::MeanRelL2 => {
            let mut per = Vec::with_capacity(truth.ncols());
            for (j, (e, q)) in residual.column_iter().zip(truth.column_iter()).enumerate() {
                let qn = q.norm();
                if !(qn > 0.0) {
                    return Err(Error::ZeroDenominator { column: Some(j) });
                }
                per.push(e.norm() / qn);
            }
            let value = per.iter().sum::<f64>() / per.len() as f64;
            Ok(ErrorReport {
                metric,
                value,
                per_snapshot: Some(per),
            })
        }
        MetricKind::RelL1Max => {
            let l1 = |m: &Matrix| -> Vec<f64> { m.column_iter().map(|c| c.lp_norm(1)).collect() };
            let denom = l1(truth).into_iter().fold(0.0f64, f64::max);
            if !(denom > 0.0) {
                return Err(Error::ZeroDenominator { column: None });
            }
            let per: Vec<f64> = l1(&residual).into_iter().map(|e| e / denom).collect();
            let value = per.iter().copied().fold(0.0f64, f64::max);
            Ok(ErrorReport {
                metric,
                value,
                per_snapshot: Some(per),
            })
        }
    }
}

pub fn evaluate(metric: MetricKind, truth: &SnapshotSet, manifold: &TrainedManifold) -> Result<ErrorReport> {
    if truth.dim() != manifold.dim() {
        return Err(Error::shape("evaluate", manifold.dim(), truth.dim()));
    }
    let rec = manifold.reconstruct_all(truth.states())?;
    evaluate_reconstruction(metric, truth.states(), &rec)
}

pub fn rel_l2_trajectory(truth: &SnapshotSet, manifold: &TrainedManifold) -> Result<f64> {
    Ok(evaluate(MetricKind::RelL2Trajectory, truth, manifold)?.value)
}

pub fn mean_rel_l2(truth: &SnapshotSet, manifold: &TrainedManifold) -> Result<f64> {
    Ok(evaluate(MetricKind::MeanRelL2, truth, manifold)?.value)
}

pub fn rel_l1_max(truth: &SnapshotSet, manifold: &TrainedManifold) -> Result<f64> {
    Ok(evaluate(MetricKind::RelL1Max, truth, manifold)?.value)
}

/// Runs `f` and returns its output with the elapsed wall-clock time.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64, n: usize, m: usize) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn exact_reconstruction_is_zero() {
        let q = random(1, 6, 4);
        for metric in MetricKind::ALL {
            assert_eq!(evaluate_reconstruction(metric, &q, &q).unwrap().value, 0.0);
        }
    }

    #[test]
    fn zero_reconstruction_gives_unit_trajectory_error() {
        let q = random(2, 6, 4);
        let r = evaluate_reconstruction(MetricKind::RelL2Trajectory, &q, &Matrix::zeros(6, 4)).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mean_rel_single_column() {
        let q = Matrix::from_column_slice(3, 1, &[1.0, -2.0, 2.0]);
        let r = evaluate_reconstruction(MetricKind::MeanRelL2, &q, &(&q * 0.9)).unwrap();
        assert_relative_eq!(r.value, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn mean_rel_equals_mean_of_per_snapshot() {
        let q = random(3, 8, 10);
        let rec = &q + random(4, 8, 10) * 0.1;
        let r = evaluate_reconstruction(MetricKind::MeanRelL2, &q, &rec).unwrap();
        let per = r.per_snapshot.unwrap();
        assert!((r.value - per.iter().sum::<f64>() / per.len() as f64).abs() < 1e-14);
    }

    #[test]
    fn rel_l1_arithmetic() {
        let truth = Matrix::from_column_slice(3, 2, &[1.0, 1.0, 2.0, 0.5, 0.0, 0.0]);
        let mut rec = truth.clone();
        rec[(0, 1)] -= 1.0;
        rec[(1, 1)] += 1.0;
        let r = evaluate_reconstruction(MetricKind::RelL1Max, &truth, &rec).unwrap();
        assert_relative_eq!(r.value, 0.5);
    }

    #[test]
    fn zero_denominators() {
        let z = Matrix::zeros(3, 2);
        assert!(matches!(
            evaluate_reconstruction(MetricKind::RelL2Trajectory, &z, &z),
            Err(Error::ZeroDenominator { column: None })
        ));
        assert!(matches!(
            evaluate_reconstruction(MetricKind::RelL1Max, &z, &z),
            Err(Error::ZeroDenominator { column: None })
        ));
        let mut q = random(5, 3, 3);
        q.column_mut(1).fill(0.0);
        assert!(matches!(
            evaluate_reconstruction(MetricKind::MeanRelL2, &q, &q),
            Err(Error::ZeroDenominator { column: Some(1) })
        ));
    }

    #[test]
    fn metrics_invariant_under_lockstep_permutation() {
        let q = random(6, 7, 9);
        let rec = &q + random(7, 7, 9) * 0.3;
        let mut perm: Vec<usize> = (0..9).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(8));
        let qp = q.select_columns(&perm);
        let rp = rec.select_columns(&perm);
        for metric in MetricKind::ALL {
            let a = evaluate_reconstruction(metric, &q, &rec).unwrap().value;
            let b = evaluate_reconstruction(metric, &qp, &rp).unwrap().value;
            assert!((a - b).abs() <= 1e-14 * a.max(1.0), "{metric:?}");
        }
    }

    #[test]
    fn metrics_are_nonnegative() {
        let q = random(9, 5, 6);
        let rec = random(10, 5, 6);
        for metric in MetricKind::ALL {
            assert!(evaluate_reconstruction(metric, &q, &rec).unwrap().value >= 0.0);
        }
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(
            evaluate_reconstruction(MetricKind::MeanRelL2, &Matrix::zeros(2, 2), &Matrix::zeros(3, 2)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in MetricKind::ALL {
            assert_eq!(MetricKind::from_name(m.name()), Some(m));
        }
        assert_eq!(MetricKind::from_name("mean-rel-l2"), Some(MetricKind::MeanRelL2));
    }
}
