//! Dimensionality reduction with POD bases augmented by learned nonlinear
//! decoder corrections.
//!
//! The affine POD decoder `q̄ + V q̂` is extended with a correction
//! `V̄ n(q̂)` acting on the next `m` POD modes. The correction comes either
//! from regularized kernel interpolation in a reproducing kernel Hilbert
//! space ([`manifold::train_kernel_manifold`]) or from an explicit
//! feature-map regression such as a quadratic manifold
//! ([`manifold::train_feature_map_manifold`]).
//!
//! ```
//! use kmr_core::{kernels::{KernelSpec, RbfKind}, manifold::{train, TrainingConfig}};
//! use kmr_core::{metrics::rel_l2_trajectory, numerics::Matrix, pod::SnapshotSet};
//!
//! let q = Matrix::from_fn(30, 12, |i, j| ((i as f64) * 0.1 + (j as f64) * 0.3).sin());
//! let data = SnapshotSet::new(q).unwrap();
//! let kernel = KernelSpec::rbf(RbfKind::Gaussian, 1.0).unwrap();
//! let manifold = train(&data, &TrainingConfig::kernel(2, 3, 1e-8, kernel)).unwrap();
//! assert!(rel_l2_trajectory(&data, &manifold).unwrap() < 1e-2);
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernels;
pub mod manifold;
pub mod metrics;
pub mod numerics;
pub mod pod;
pub mod problems;

pub use error::{Error, Result};
