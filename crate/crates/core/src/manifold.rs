//! Nonlinear-augmentation decoders on top of a POD basis.
//!
//! A trained manifold decodes latent coordinates `q̂ ∈ ℝʳ` as
//! `g(q̂) = q̄ + V q̂ + V̄ n(q̂)`, where the correction `n: ℝʳ → ℝᵐ` predicts
//! the coefficients of the augmenting modes. The correction is either a
//! kernel expansion over the training inputs (fitted by regularized kernel
//! interpolation) or an explicit feature-map regression `Ξ φ(q̂)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{fit_normalizer, FeatureMap, KernelBase, KernelSpec, RbfKind};
use crate::numerics::{solve_spd, JitterPolicy, Matrix, Vector};
use crate::pod::{OffsetChoice, PodBasis, PodDecomposition, SnapshotSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Method {
    Pod,
    FeatureMap { feature_map: FeatureMap },
    Kernel { kernel: KernelSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub r: usize,
    pub m: usize,
    pub lambda: f64,
    pub offset: OffsetChoice,
    #[serde(flatten)]
    pub method: Method,
    /// Fit a min/range normalizer on the latent training inputs (kernel
    /// method only).
    #[serde(default)]
    pub normalize_inputs: bool,
    /// Overrides the method's default jitter policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<JitterPolicy>,
}

impl TrainingConfig {
    pub fn pod(r: usize) -> Self {
        TrainingConfig {
            r,
            m: 0,
            lambda: 0.0,
            offset: OffsetChoice::Mean,
            method: Method::Pod,
            normalize_inputs: false,
            jitter: None,
        }
    }

    pub fn kernel(r: usize, m: usize, lambda: f64, kernel: KernelSpec) -> Self {
        TrainingConfig {
            r,
            m,
            lambda,
            offset: OffsetChoice::Mean,
            method: Method::Kernel { kernel },
            normalize_inputs: false,
            jitter: None,
        }
    }

    pub fn feature_map(r: usize, m: usize, lambda: f64, feature_map: FeatureMap) -> Self {
        TrainingConfig {
            r,
            m,
            lambda,
            offset: OffsetChoice::Mean,
            method: Method::FeatureMap { feature_map },
            normalize_inputs: false,
            jitter: None,
        }
    }

    pub fn with_offset(mut self, offset: OffsetChoice) -> Self {
        self.offset = offset;
        self
    }

    pub fn normalized(mut self, on: bool) -> Self {
        self.normalize_inputs = on;
        self
    }

    pub fn with_jitter(mut self, policy: JitterPolicy) -> Self {
        self.jitter = Some(policy);
        self
    }

    pub fn jitter_policy(&self) -> JitterPolicy {
        self.jitter.unwrap_or(match self.method {
            Method::Kernel { .. } => JitterPolicy::KERNEL_DEFAULT,
            Method::Pod | Method::FeatureMap { .. } => JitterPolicy::Fail,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::InvalidInput("r must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        match self.method {
            Method::Pod => {
                if self.m != 0 {
                    return Err(Error::InvalidInput("POD-only manifolds take m = 0".into()));
                }
            }
            Method::FeatureMap { .. } | Method::Kernel { .. } => {
                if self.m == 0 {
                    return Err(Error::InvalidInput("nonlinear manifolds need m >= 1".into()));
                }
            }
        }
        if let Method::Kernel { kernel } = &self.method {
            // Only conditionally positive definite: the plain Gram matrix can be
            // indefinite, so a ridge term is required.
            if matches!(&kernel.base, KernelBase::Rbf(f) if f.kind == RbfKind::ThinPlateSpline) && self.lambda == 0.0 {
                return Err(Error::InvalidInput("thin-plate spline kernels need lambda > 0".into()));
            }
        }
        if self.normalize_inputs && !matches!(self.method, Method::Kernel { .. }) {
            return Err(Error::InvalidInput("input normalization applies to the kernel method only".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldKind {
    PodOnly,
    Kernel {
        /// Kernel with its fitted normalizer, if any.
        kernel: KernelSpec,
        /// `M × m` coefficients.
        omega: Matrix,
        /// `r × M` latent training inputs, stored normalized.
        train_inputs: Matrix,
    },
    FeatureMap {
        feature_map: FeatureMap,
        /// `m × n_φ` coefficients.
        xi: Matrix,
    },
}

impl ManifoldKind {
    pub fn name(&self) -> &'static str {
        match self {
            ManifoldKind::PodOnly => "pod_only",
            ManifoldKind::Kernel { .. } => "kernel",
            ManifoldKind::FeatureMap { .. } => "feature_map",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedManifold {
    pub basis: PodBasis,
    pub kind: ManifoldKind,
    pub lambda: f64,
}

/// Trains whichever manifold `cfg.method` selects.
pub fn train(train: &SnapshotSet, cfg: &TrainingConfig) -> Result<TrainedManifold> {
    cfg.validate()?;
    let pod = PodDecomposition::new(train, &cfg.offset)?;
    train_with_decomposition(train, &pod, cfg)
}

/// Like [`train`], reusing a precomputed decomposition of `train`. Sweeps
/// over `r`, `m`, kernels and `λ` share one SVD this way.
pub fn train_with_decomposition(
    train: &SnapshotSet,
    pod: &PodDecomposition,
    cfg: &TrainingConfig,
) -> Result<TrainedManifold> {
    cfg.validate()?;
    if pod.offset_choice != cfg.offset {
        return Err(Error::InvalidInput("decomposition was built with a different offset".into()));
    }
    if pod.offset.len() != train.dim() {
        return Err(Error::shape("decomposition", pod.offset.len(), train.dim()));
    }
    let basis = pod.basis(cfg.r, cfg.m)?;
    match &cfg.method {
        Method::Pod => Ok(TrainedManifold {
            basis,
            kind: ManifoldKind::PodOnly,
            lambda: 0.0,
        }),
        Method::Kernel { kernel } => kernel_from_basis(train, basis, kernel, cfg),
        Method::FeatureMap { feature_map } => feature_map_from_basis(train, basis, feature_map, cfg),
    }
}

pub fn train_pod(train: &SnapshotSet, cfg: &TrainingConfig) -> Result<TrainedManifold> {
    if cfg.method != Method::Pod {
        return Err(Error::InvalidInput("train_pod needs the pod method".into()));
    }
    self::train(train, cfg)
}

/// Kernel manifold: solves `(K(Q̂, Q̂) + λI) Ω = P̂ᵀ`.
pub fn train_kernel_manifold(train: &SnapshotSet, cfg: &TrainingConfig) -> Result<TrainedManifold> {
    if !matches!(cfg.method, Method::Kernel { .. }) {
        return Err(Error::InvalidInput("train_kernel_manifold needs a kernel method".into()));
    }
    self::train(train, cfg)
}

/// Feature-map manifold: solves `(φ(Q̂)φ(Q̂)ᵀ + λI) Ξᵀ = φ(Q̂) P̂ᵀ`.
pub fn train_feature_map_manifold(train: &SnapshotSet, cfg: &TrainingConfig) -> Result<TrainedManifold> {
    if !matches!(cfg.method, Method::FeatureMap { .. }) {
        return Err(Error::InvalidInput("train_feature_map_manifold needs a feature-map method".into()));
    }
    self::train(train, cfg)
}

fn kernel_from_basis(
    train: &SnapshotSet,
    basis: PodBasis,
    kernel: &KernelSpec,
    cfg: &TrainingConfig,
) -> Result<TrainedManifold> {
    let q_hat = basis.encode_all(train.states())?;
    let p_hat = basis.project_high_all(train.states())?;

    let mut kernel = KernelSpec {
        base: kernel.base.clone(),
        normalizer: None,
    };
    if cfg.normalize_inputs {
        kernel.normalizer = Some(fit_normalizer(&q_hat)?);
    }
    let inputs = kernel.prepare_columns(&q_hat)?;
    let omega = fit_kernel_coefficients(&kernel, &inputs, &p_hat, cfg.lambda, cfg.jitter_policy())?;
    Ok(TrainedManifold {
        basis,
        kind: ManifoldKind::Kernel {
            kernel,
            omega,
            train_inputs: inputs,
        },
        lambda: cfg.lambda,
    })
}

fn feature_map_from_basis(
    train: &SnapshotSet,
    basis: PodBasis,
    feature_map: &FeatureMap,
    cfg: &TrainingConfig,
) -> Result<TrainedManifold> {
    let q_hat = basis.encode_all(train.states())?;
    let p_hat = basis.project_high_all(train.states())?;
    let xi = fit_feature_map_coefficients(feature_map, &q_hat, &p_hat, cfg.lambda, cfg.jitter_policy())?;
    Ok(TrainedManifold {
        basis,
        kind: ManifoldKind::FeatureMap {
            feature_map: feature_map.clone(),
            xi,
        },
        lambda: cfg.lambda,
    })
}

/// Representer-theorem coefficients for inputs `d × M` (already normalized
/// if the kernel carries a normalizer) and targets `p × M`. Returns `M × p`.
pub fn fit_kernel_coefficients(
    kernel: &KernelSpec,
    inputs: &Matrix,
    targets: &Matrix,
    lambda: f64,
    policy: JitterPolicy,
) -> Result<Matrix> {
    if inputs.ncols() != targets.ncols() {
        return Err(Error::shape("kernel fit targets", inputs.ncols(), targets.ncols()));
    }
    if lambda == 0.0 {
        if let Some((i, j)) = first_duplicate_column(inputs) {
            return Err(Error::SingularSystem(format!(
                "training inputs {i} and {j} coincide and lambda = 0"
            )));
        }
    }
    let mut gram = kernel.gram_prepared(inputs)?;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    if targets.nrows() == 0 {
        return Ok(Matrix::zeros(inputs.ncols(), 0));
    }
    solve_spd(&gram, &targets.transpose(), policy)
}

/// Regularized least-squares coefficients `Ξ` (`p × n_φ`) mapping features
/// of `inputs` (`d × M`) to `targets` (`p × M`).
pub fn fit_feature_map_coefficients(
    feature_map: &FeatureMap,
    inputs: &Matrix,
    targets: &Matrix,
    lambda: f64,
    policy: JitterPolicy,
) -> Result<Matrix> {
    if inputs.ncols() != targets.ncols() {
        return Err(Error::shape("feature-map fit targets", inputs.ncols(), targets.ncols()));
    }
    let phi = feature_map.apply_columns(inputs)?;
    let n_phi = phi.nrows();
    if targets.nrows() == 0 {
        return Ok(Matrix::zeros(0, n_phi));
    }
    let mut normal = &phi * phi.transpose();
    for i in 0..n_phi {
        normal[(i, i)] += lambda;
    }
    let rhs = &phi * targets.transpose();
    let xi_t = solve_spd(&normal, &rhs, policy)?;
    Ok(xi_t.transpose())
}

fn first_duplicate_column(x: &Matrix) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..x.ncols()).collect();
    let key = |j: usize| x.column(j).iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
    order.sort_by_key(|&j| key(j));
    order
        .windows(2)
        .find(|w| x.column(w[0]) == x.column(w[1]))
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
}

impl TrainedManifold {
    pub fn r(&self) -> usize {
        self.basis.r()
    }

    pub fn m(&self) -> usize {
        self.basis.m()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn encode(&self, q: &Vector) -> Result<Vector> {
        self.basis.encode(q)
    }

    /// `n(q̂)` for the kernel kind, `Ξ φ(q̂)` for the feature-map kind, and
    /// the empty vector for POD.
    pub fn nonlinear_term(&self, q_hat: &Vector) -> Result<Vector> {
        if q_hat.len() != self.r() {
            return Err(Error::shape("nonlinear_term", self.r(), q_hat.len()));
        }
        match &self.kind {
            ManifoldKind::PodOnly => Ok(Vector::zeros(self.m())),
            ManifoldKind::Kernel {
                kernel,
                omega,
                train_inputs,
            } => {
                let query = kernel.prepare(q_hat.as_slice())?;
                let kv = kernel.kernel_vector_prepared(train_inputs, &query)?;
                Ok(omega.tr_mul(&kv))
            }
            ManifoldKind::FeatureMap { feature_map, xi } => {
                let phi = Vector::from_vec(feature_map.apply(q_hat.as_slice())?);
                Ok(xi * phi)
            }
        }
    }

    /// Column-wise `nonlinear_term` for an `r × k` matrix of latent inputs.
    pub fn nonlinear_term_all(&self, q_hat: &Matrix) -> Result<Matrix> {
        if q_hat.nrows() != self.r() {
            return Err(Error::shape("nonlinear_term_all", self.r(), q_hat.nrows()));
        }
        match &self.kind {
            ManifoldKind::PodOnly => Ok(Matrix::zeros(self.m(), q_hat.ncols())),
            ManifoldKind::Kernel {
                kernel,
                omega,
                train_inputs,
            } => {
                let queries = kernel.prepare_columns(q_hat)?;
                let cross = kernel.cross_prepared(train_inputs, &queries)?;
                Ok(omega.tr_mul(&cross))
            }
            ManifoldKind::FeatureMap { feature_map, xi } => Ok(xi * feature_map.apply_columns(q_hat)?),
        }
    }

    /// `g(q̂) = q̄ + V q̂ + V̄ n(q̂)`
    pub fn decode(&self, q_hat: &Vector) -> Result<Vector> {
        let affine = self.basis.decode_affine(q_hat)?;
        if self.m() == 0 {
            return Ok(affine);
        }
        Ok(affine + &self.basis.v_bar * self.nonlinear_term(q_hat)?)
    }

    pub fn decode_all(&self, q_hat: &Matrix) -> Result<Matrix> {
        if q_hat.nrows() != self.r() {
            return Err(Error::shape("decode_all", self.r(), q_hat.nrows()));
        }
        let mut out = &self.basis.v * q_hat;
        if self.m() > 0 {
            out += &self.basis.v_bar * self.nonlinear_term_all(q_hat)?;
        }
        for mut col in out.column_iter_mut() {
            col += &self.basis.offset;
        }
        Ok(out)
    }

    /// `g(h(q))`
    pub fn reconstruct(&self, q: &Vector) -> Result<Vector> {
        self.decode(&self.encode(q)?)
    }

    pub fn reconstruct_all(&self, states: &Matrix) -> Result<Matrix> {
        self.decode_all(&self.basis.encode_all(states)?)
    }

    /// Squared RKHS norm of the correction (`tr(Ωᵀ K Ω)`), or `‖Ξ‖²_F` for
    /// the feature-map kind.
    pub fn regularizer(&self) -> Result<f64> {
        match &self.kind {
            ManifoldKind::PodOnly => Ok(0.0),
            ManifoldKind::Kernel {
                kernel,
                omega,
                train_inputs,
            } => {
                let gram = kernel.gram_prepared(train_inputs)?;
                Ok((omega.transpose() * gram * omega).trace())
            }
            ManifoldKind::FeatureMap { xi, .. } => Ok(xi.norm_squared()),
        }
    }

    /// `Σⱼ ‖p̂ⱼ − n(q̂ⱼ)‖² + λ‖n‖²` over `data`.
    pub fn latent_objective(&self, data: &SnapshotSet) -> Result<f64> {
        let q_hat = self.basis.encode_all(data.states())?;
        let p_hat = self.basis.project_high_all(data.states())?;
        let fit = (p_hat - self.nonlinear_term_all(&q_hat)?).norm_squared();
        Ok(fit + self.lambda * self.regularizer()?)
    }

    /// `Σⱼ ‖qⱼ − g(h(qⱼ))‖² + λ‖n‖²` over `data`.
    pub fn full_objective(&self, data: &SnapshotSet) -> Result<f64> {
        let rec = self.reconstruct_all(data.states())?;
        let fit = (data.states() - rec).norm_squared();
        Ok(fit + self.lambda * self.regularizer()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{FeatureMapKernel, KernelBase, RbfKind};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(seed: u64, n: usize, m: usize) -> SnapshotSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SnapshotSet::new(Matrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))).unwrap()
    }

    fn gaussian(eps: f64) -> KernelSpec {
        KernelSpec::rbf(RbfKind::Gaussian, eps).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn single_point_representer_system() {
        let k = gaussian(0.7);
        let x = Matrix::from_column_slice(2, 1, &[0.3, -0.4]);
        let p = Matrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
        let omega = fit_kernel_coefficients(&k, &x, &p, 0.0, JitterPolicy::Fail).unwrap();
        let k11 = k.eval(x.as_slice(), x.as_slice()).unwrap();
        for i in 0..3 {
            assert_relative_eq!(omega[(0, i)], p[(i, 0)] / k11, epsilon = 1e-15);
        }
        // n(x₁) = Ωᵀ K(x₁, x₁) reproduces p₁ exactly.
        let pred = omega.transpose() * Vector::from_element(1, k11);
        assert!((pred - p.column(0)).amax() < 1e-15);
    }

    #[test]
    fn single_point_feature_map_fit() {
        let xi = fit_feature_map_coefficients(
            &FeatureMap::QuadraticNoDuplicates,
            &Matrix::from_element(1, 1, 1.0),
            &Matrix::from_element(1, 1, 2.0),
            0.0,
            JitterPolicy::Fail,
        )
        .unwrap();
        assert_eq!(xi, Matrix::from_element(1, 1, 2.0));
    }

    #[test]
    fn zero_targets_give_zero_coefficients() {
        // Rank-2 data is fully captured by r = 1, m = 1 at zero offset, so P̂ is
        // the exact second-mode coefficients; fit against zero targets directly.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Matrix::from_fn(2, 8, |_, _| rng.random_range(-1.0..1.0));
        let xi = fit_feature_map_coefficients(
            &FeatureMap::QuadraticNoDuplicates,
            &x,
            &Matrix::zeros(3, 8),
            0.0,
            JitterPolicy::Fail,
        )
        .unwrap();
        assert!(xi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn data_in_span_of_v_gives_zero_correction() {
        // Snapshots lie exactly in a 2D subspace: P̂ = 0, the augmenting basis
        // is truncated away and the correction vanishes.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis = Matrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let coeffs = Matrix::from_fn(2, 10, |_, _| rng.random_range(-1.0..1.0));
        let set = SnapshotSet::new(basis * coeffs).unwrap();
        let cfg = TrainingConfig::feature_map(2, 1, 0.0, FeatureMap::QuadraticNoDuplicates).with_offset(OffsetChoice::Zero);
        let trained = train_feature_map_manifold(&set, &cfg).unwrap();
        let ManifoldKind::FeatureMap { xi, .. } = &trained.kind else { unreachable!() };
        assert!(xi.iter().all(|&v| v == 0.0));
        let z = random_vec(&mut rng, 2);
        assert!(trained.nonlinear_term(&z).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicate_inputs_with_zero_lambda_are_singular() {
        let k = gaussian(1.0);
        let x = Matrix::from_column_slice(1, 3, &[0.5, 0.1, 0.5]);
        let p = Matrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let err = fit_kernel_coefficients(&k, &x, &p, 0.0, JitterPolicy::KERNEL_DEFAULT).unwrap_err();
        assert!(matches!(err, Error::SingularSystem(_)));
        assert!(fit_kernel_coefficients(&k, &x, &p, 1e-3, JitterPolicy::Fail).is_ok());
    }

    #[test]
    fn heavy_regularization_recovers_pod() {
        let set = random_set(11, 20, 12);
        let cfg = TrainingConfig::kernel(2, 3, 1e12, gaussian(1.0));
        let km = train_kernel_manifold(&set, &cfg).unwrap();
        let pod = train_pod(&set, &TrainingConfig::pod(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let q = random_vec(&mut rng, 20);
            let a = km.reconstruct(&q).unwrap();
            let b = pod.reconstruct(&q).unwrap();
            assert!((&a - &b).norm() / b.norm() <= 1e-6);
        }
    }

    #[test]
    fn negligible_regularization_interpolates() {
        let set = random_set(12, 20, 12);
        let cfg = TrainingConfig::kernel(2, 3, 1e-8, gaussian(1.0));
        let km = train_kernel_manifold(&set, &cfg).unwrap();
        let pod5 = train_pod(&set, &TrainingConfig::pod(5)).unwrap();
        let err = |m: &TrainedManifold| (set.states() - m.reconstruct_all(set.states()).unwrap()).norm();
        let (e_km, e_pod) = (err(&km), err(&pod5));
        assert!((e_km - e_pod).abs() / e_pod <= 1e-4, "{e_km} vs {e_pod}");
    }

    #[test]
    fn zero_omega_decodes_affinely() {
        let set = random_set(13, 10, 8);
        let mut km = train_kernel_manifold(&set, &TrainingConfig::kernel(2, 2, 1e-3, gaussian(1.0))).unwrap();
        if let ManifoldKind::Kernel { omega, .. } = &mut km.kind {
            omega.fill(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = random_vec(&mut rng, 2);
        assert_eq!(km.decode(&z).unwrap(), km.basis.decode_affine(&z).unwrap());
        assert!(km.nonlinear_term(&z).unwrap().iter().all(|&v| v == 0.0));

        let mut fm = train_feature_map_manifold(
            &set,
            &TrainingConfig::feature_map(2, 2, 1e-3, FeatureMap::QuadraticNoDuplicates),
        )
        .unwrap();
        if let ManifoldKind::FeatureMap { xi, .. } = &mut fm.kind {
            xi.fill(0.0);
        }
        assert!(fm.nonlinear_term(&z).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pod_only_decode_and_reconstruct() {
        let set = random_set(14, 9, 7);
        let pod = train_pod(&set, &TrainingConfig::pod(3)).unwrap();
        assert_eq!(pod.decode(&Vector::zeros(3)).unwrap(), pod.basis.offset);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_vec(&mut rng, 9);
        let rec = pod.reconstruct(&q).unwrap();
        assert!((&q - rec).norm() <= (&q - &pod.basis.offset).norm());
        assert_eq!(pod.nonlinear_term(&Vector::zeros(3)).unwrap().len(), 0);
    }

    #[test]
    fn correction_applies_at_offset() {
        let set = random_set(15, 12, 10);
        let km = train_kernel_manifold(&set, &TrainingConfig::kernel(2, 2, 1e-6, gaussian(1.0))).unwrap();
        let rec = km.reconstruct(&km.basis.offset).unwrap();
        let expected = &km.basis.offset + &km.basis.v_bar * km.nonlinear_term(&Vector::zeros(2)).unwrap();
        assert!((rec - expected).amax() < 1e-12);
    }

    #[test]
    fn exact_interpolation_at_training_points() {
        let set = random_set(16, 15, 10);
        let cfg = TrainingConfig::kernel(3, 4, 0.0, KernelSpec::rbf(RbfKind::MaternBasic, 1.0).unwrap());
        let km = train_kernel_manifold(&set, &cfg).unwrap();
        let q_hat = km.basis.encode_all(set.states()).unwrap();
        let p_hat = km.basis.project_high_all(set.states()).unwrap();
        for j in 0..set.len() {
            let pred = km.nonlinear_term(&q_hat.column(j).into_owned()).unwrap();
            let target = p_hat.column(j);
            assert!((&pred - target).norm() <= 1e-6 * target.norm().max(1e-12));
        }
    }

    #[test]
    fn single_and_batch_decode_agree() {
        let set = random_set(17, 14, 11);
        let cfg = TrainingConfig::kernel(2, 3, 1e-4, gaussian(0.8)).normalized(true);
        let km = train_kernel_manifold(&set, &cfg).unwrap();
        let q_hat = km.basis.encode_all(set.states()).unwrap();
        let all = km.decode_all(&q_hat).unwrap();
        for j in [0, 5, 10] {
            let one = km.decode(&q_hat.column(j).into_owned()).unwrap();
            assert!((all.column(j) - one).amax() < 1e-12);
        }
    }

    #[test]
    fn normalized_inputs_are_stored_in_unit_box() {
        let set = random_set(18, 14, 11);
        let cfg = TrainingConfig::kernel(3, 3, 1e-6, gaussian(0.5)).normalized(true);
        let km = train_kernel_manifold(&set, &cfg).unwrap();
        let ManifoldKind::Kernel { kernel, train_inputs, .. } = &km.kind else { unreachable!() };
        assert!(kernel.normalizer.is_some());
        assert!(train_inputs.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn decoder_linear_part() {
        let set = random_set(19, 12, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let manifolds = [
            train_pod(&set, &TrainingConfig::pod(2)).unwrap(),
            train_kernel_manifold(&set, &TrainingConfig::kernel(2, 3, 1e-3, gaussian(1.0))).unwrap(),
            train_feature_map_manifold(&set, &TrainingConfig::feature_map(2, 3, 1e-3, FeatureMap::QuadraticNoDuplicates)).unwrap(),
        ];
        for mf in &manifolds {
            let z = random_vec(&mut rng, 2);
            let lhs = mf.decode(&z).unwrap() - &mf.basis.v_bar * mf.nonlinear_term(&z).unwrap();
            let rhs = &mf.basis.offset + &mf.basis.v * &z;
            assert!((lhs - rhs).amax() < 1e-14);
        }
    }

    #[test]
    fn config_validation() {
        let set = random_set(20, 8, 6);
        let mut cfg = TrainingConfig::kernel(2, 0, 1.0, gaussian(1.0));
        assert!(train(&set, &cfg).is_err());
        cfg.m = 2;
        cfg.lambda = -1.0;
        assert!(train(&set, &cfg).is_err());
        let fm = TrainingConfig::feature_map(2, 2, 0.1, FeatureMap::QuadraticNoDuplicates).normalized(true);
        assert!(train(&set, &fm).is_err());
        assert!(train_kernel_manifold(&set, &TrainingConfig::pod(2)).is_err());
    }

    #[test]
    fn thin_plate_spline_needs_ridge() {
        let set = random_set(21, 8, 6);
        let tps = KernelSpec::rbf(RbfKind::ThinPlateSpline, 1.0).unwrap();
        assert!(matches!(
            train(&set, &TrainingConfig::kernel(2, 2, 0.0, tps.clone())),
            Err(Error::InvalidInput(_))
        ));
        // The Gram matrix may be indefinite, so a small ridge can still fail
        // the symmetric factorization; a dominant one cannot.
        match train(&set, &TrainingConfig::kernel(2, 2, 1e-6, tps.clone())) {
            Ok(_) | Err(Error::SingularSystem(_)) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
        assert!(train(&set, &TrainingConfig::kernel(2, 2, 1e2, tps)).is_ok());
    }

    #[test]
    fn training_config_json() {
        let cfg = TrainingConfig::kernel(
            10,
            100,
            1e-9,
            KernelSpec::new(KernelBase::FeatureMap(FeatureMapKernel::quadratic_scaled(10))),
        )
        .normalized(true);
        let s = serde_json::to_string(&cfg).unwrap();
        let back: TrainingConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.jitter_policy(), JitterPolicy::KERNEL_DEFAULT);
    }
}
