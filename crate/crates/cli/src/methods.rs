//! Mapping from command-line method and kernel names to training configs.

use kmr_core::kernels::{FeatureMap, FeatureMapKernel, KernelBase, KernelSpec, PolynomialKernel, RbfKind};
use kmr_core::manifold::{Method, TrainingConfig};
use kmr_core::numerics::JitterPolicy;
use kmr_core::pod::OffsetChoice;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    Pod,
    /// Quadratic manifold via explicit feature-map regression.
    #[value(name = "fm-qm")]
    #[serde(alias = "fm-qm")]
    FmQm,
    Kernel,
}

impl MethodId {
    pub fn name(self) -> &'static str {
        match self {
            MethodId::Pod => "pod",
            MethodId::FmQm => "fm_qm",
            MethodId::Kernel => "kernel",
        }
    }
}

/// Optional polynomial-kernel parameters; unset values take defaults
/// `c = 1`, `ρ = 1/r`, degree 2.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PolynomialOptions {
    pub c: Option<f64>,
    pub rho: Option<f64>,
    pub degree: Option<u32>,
}

pub fn is_rbf_name(name: &str) -> bool {
    RbfKind::from_name(&name.replace('-', "_")).is_some()
}

/// Builds a kernel from its command-line name.
///
/// `quadratic` is the feature-map kernel of the duplicate-free quadratic
/// map: weight `G = I`, or `G = I/n_φ` when inputs are normalized so the
/// feature scale stays comparable to the RBF kernels.
pub fn kernel_from_name(
    name: &str,
    epsilon: Option<f64>,
    r: usize,
    normalized: bool,
    poly: PolynomialOptions,
) -> Result<KernelSpec> {
    let key = name.replace('-', "_");
    if let Some(kind) = RbfKind::from_name(&key) {
        let eps = epsilon.ok_or_else(|| CliError::Config(format!("kernel `{name}` needs a shape parameter (--eps)")))?;
        return Ok(KernelSpec::rbf(kind, eps)?);
    }
    if epsilon.is_some() {
        return Err(CliError::Config(format!("kernel `{name}` takes no shape parameter")));
    }
    match key.as_str() {
        "polynomial" => {
            let p = PolynomialKernel::new(
                poly.c.unwrap_or(1.0),
                poly.rho.unwrap_or(1.0 / r.max(1) as f64),
                poly.degree.unwrap_or(2),
            )?;
            Ok(KernelSpec::new(KernelBase::Polynomial(p)))
        }
        "quadratic" => {
            let fm = if normalized {
                FeatureMapKernel::quadratic_scaled(r)
            } else {
                FeatureMapKernel::quadratic()
            };
            Ok(KernelSpec::new(KernelBase::FeatureMap(fm)))
        }
        _ => Err(CliError::UnknownKernel(name.to_string())),
    }
}

/// Everything that identifies one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunChoice {
    pub method: MethodId,
    pub r: usize,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub polynomial: PolynomialOptions,
    #[serde(default)]
    pub zero_offset: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<JitterPolicy>,
}

impl RunChoice {
    pub fn training_config(&self) -> Result<TrainingConfig> {
        let method = match self.method {
            MethodId::Pod => {
                if self.kernel.is_some() || self.epsilon.is_some() || self.normalize {
                    return Err(CliError::Config("pod takes no kernel, shape or normalization".into()));
                }
                if self.m != 0 {
                    return Err(CliError::Config("pod takes m = 0".into()));
                }
                Method::Pod
            }
            MethodId::FmQm => {
                if self.kernel.is_some() || self.epsilon.is_some() || self.normalize {
                    return Err(CliError::Config("fm-qm takes no kernel, shape or normalization".into()));
                }
                Method::FeatureMap {
                    feature_map: FeatureMap::QuadraticNoDuplicates,
                }
            }
            MethodId::Kernel => {
                let name = self
                    .kernel
                    .as_deref()
                    .ok_or_else(|| CliError::Config("the kernel method needs --kernel".into()))?;
                Method::Kernel {
                    kernel: kernel_from_name(name, self.epsilon, self.r, self.normalize, self.polynomial)?,
                }
            }
        };
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(CliError::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(TrainingConfig {
            r: self.r,
            m: self.m,
            lambda: if self.method == MethodId::Pod { 0.0 } else { self.lambda },
            offset: if self.zero_offset { OffsetChoice::Zero } else { OffsetChoice::Mean },
            method,
            normalize_inputs: self.normalize,
            jitter: self.jitter,
        })
    }
}

/// Short method label for result tables, e.g. `kernel` or `fm_qm`.
pub fn method_label(cfg: &TrainingConfig) -> &'static str {
    match &cfg.method {
        Method::Pod => "pod",
        Method::FeatureMap {
            feature_map: FeatureMap::QuadraticNoDuplicates,
        } => "fm_qm",
        Method::FeatureMap { .. } => "fm_custom",
        Method::Kernel { .. } => "kernel",
    }
}

pub fn kernel_label(cfg: &TrainingConfig) -> Option<(String, Option<f64>)> {
    match &cfg.method {
        Method::Kernel { kernel } => {
            let eps = match &kernel.base {
                KernelBase::Rbf(f) => Some(f.epsilon),
                _ => None,
            };
            Some((kernel.label(), eps))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn choice(method: MethodId, kernel: Option<&str>, eps: Option<f64>) -> RunChoice {
        RunChoice {
            method,
            r: 3,
            m: if method == MethodId::Pod { 0 } else { 2 },
            kernel: kernel.map(String::from),
            epsilon: eps,
            lambda: 1e-6,
            normalize: false,
            polynomial: PolynomialOptions::default(),
            zero_offset: false,
            jitter: None,
        }
    }

    #[test]
    fn rbf_names_accept_hyphens() {
        let k = kernel_from_name("matern-basic", Some(0.5), 3, false, PolynomialOptions::default()).unwrap();
        assert_eq!(k.label(), "matern_basic");
    }

    #[test]
    fn unknown_kernel_is_reported() {
        let err = kernel_from_name("bessel", None, 3, false, PolynomialOptions::default()).unwrap_err();
        assert!(matches!(err, CliError::UnknownKernel(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rbf_needs_epsilon() {
        assert!(kernel_from_name("gaussian", None, 3, false, PolynomialOptions::default()).is_err());
        assert!(kernel_from_name("quadratic", Some(1.0), 3, false, PolynomialOptions::default()).is_err());
    }

    #[test]
    fn polynomial_defaults_to_inverse_r() {
        let k = kernel_from_name("polynomial", None, 4, false, PolynomialOptions::default()).unwrap();
        let KernelBase::Polynomial(p) = k.base else { panic!() };
        assert_eq!((p.c, p.rho, p.ell), (1.0, 0.25, 2));
    }

    #[test]
    fn pod_ignores_lambda_and_rejects_kernel() {
        let cfg = choice(MethodId::Pod, None, None).training_config().unwrap();
        assert_eq!((cfg.m, cfg.lambda), (0, 0.0));
        assert!(choice(MethodId::Pod, Some("gaussian"), Some(1.0)).training_config().is_err());
    }

    #[test]
    fn labels() {
        let cfg = choice(MethodId::Kernel, Some("gaussian"), Some(0.1)).training_config().unwrap();
        assert_eq!(method_label(&cfg), "kernel");
        assert_eq!(kernel_label(&cfg), Some(("gaussian".to_string(), Some(0.1))));
        let cfg = choice(MethodId::FmQm, None, None).training_config().unwrap();
        assert_eq!(method_label(&cfg), "fm_qm");
        assert_eq!(kernel_label(&cfg), None);
    }
}
