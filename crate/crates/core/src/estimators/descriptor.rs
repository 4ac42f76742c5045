//! Declarative estimator descriptions, as they appear in experiment configs.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{
    b_kmse_alpha, default_lambda_grid, empirical_risk_hat, generic_shrinkage, kme, r_kmse_lambda,
    s_kmse_select_lambda, s_kmse_weights, GramStats,
};
use crate::error::{KmseError, Result};
use crate::expansion::FunctionExpansion;
use crate::kernels::{GramMatrix, KernelSpec, Points};

/// How `lambda` is chosen for R-KMSE or S-KMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LambdaRule {
    /// R-KMSE: closed-form minimiser. S-KMSE: grid search on the LOOCV score,
    /// over `grid` if given, else the default grid scaled by the smallest
    /// nonzero Gram eigenvalue.
    Loocv {
        #[serde(default)]
        grid: Option<Vec<f64>>,
    },
    Fixed { value: f64 },
    /// `factor` times the smallest nonzero Gram eigenvalue.
    Gamma0 { factor: f64 },
    /// `c / sqrt(n)`.
    Rate { c: f64 },
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Loocv { grid: None }
    }
}

/// How `alpha` is chosen for the generic shrinker `alpha f* + (1 - alpha) mu^`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlphaRule {
    Fixed { value: f64 },
    /// `fraction * 2 D^ / (D^ + |f* - mu^|^2)`.
    BoundFraction { fraction: f64 },
    /// `D^ / (D^ + |f* - mu^|^2)`.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShrinkTarget {
    #[default]
    Zero,
    /// `scale * k(point, .)`.
    Atom {
        point: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ShrinkTarget {
    pub fn expansion(&self, dim: usize) -> FunctionExpansion {
        match self {
            ShrinkTarget::Zero => FunctionExpansion::zero(dim),
            ShrinkTarget::Atom { point, scale } => FunctionExpansion::atom(point, *scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Kme {
        #[serde(default)]
        id: Option<String>,
    },
    BKmse {
        #[serde(default)]
        id: Option<String>,
    },
    RKmse {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        lambda: LambdaRule,
    },
    SKmse {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        lambda: LambdaRule,
    },
    Shrink {
        #[serde(default)]
        id: Option<String>,
        #[serde(default)]
        target: ShrinkTarget,
        alpha: AlphaRule,
        #[serde(default)]
        positive_part: bool,
    },
}

/// A fitted estimate: weights over the sample, or a general expansion when
/// the estimate carries atoms outside the sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Weights(DVector<f64>),
    Expansion(FunctionExpansion),
}

impl Estimate {
    pub fn into_expansion(self, x: &Points) -> Result<FunctionExpansion> {
        match self {
            Estimate::Weights(w) => FunctionExpansion::new(x.clone(), w),
            Estimate::Expansion(f) => Ok(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fitted {
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub estimate: Estimate,
}

impl EstimatorSpec {
    pub fn kme() -> Self {
        EstimatorSpec::Kme { id: None }
    }
    pub fn b_kmse() -> Self {
        EstimatorSpec::BKmse { id: None }
    }
    pub fn r_kmse() -> Self {
        EstimatorSpec::RKmse { id: None, lambda: LambdaRule::default() }
    }
    pub fn s_kmse() -> Self {
        EstimatorSpec::SKmse { id: None, lambda: LambdaRule::default() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EstimatorSpec::Kme { .. } => "kme",
            EstimatorSpec::BKmse { .. } => "b-kmse",
            EstimatorSpec::RKmse { .. } => "r-kmse",
            EstimatorSpec::SKmse { .. } => "s-kmse",
            EstimatorSpec::Shrink { .. } => "shrink",
        }
    }

    /// Explicit id, or the kind name.
    pub fn id(&self) -> String {
        let explicit = match self {
            EstimatorSpec::Kme { id }
            | EstimatorSpec::BKmse { id }
            | EstimatorSpec::RKmse { id, .. }
            | EstimatorSpec::SKmse { id, .. }
            | EstimatorSpec::Shrink { id, .. } => id,
        };
        explicit.clone().unwrap_or_else(|| self.kind().to_string())
    }

    pub fn with_id(mut self, new_id: impl Into<String>) -> Self {
        let slot = match &mut self {
            EstimatorSpec::Kme { id }
            | EstimatorSpec::BKmse { id }
            | EstimatorSpec::RKmse { id, .. }
            | EstimatorSpec::SKmse { id, .. }
            | EstimatorSpec::Shrink { id, .. } => id,
        };
        *slot = Some(new_id.into());
        self
    }

    /// Smallest sample size the estimator accepts.
    pub fn min_sample(&self) -> usize {
        match self {
            EstimatorSpec::Kme { .. } => 1,
            _ => 2,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(KmseError::Config(format!("estimator {:?}: {m}", self.id())));
        match self {
            EstimatorSpec::Kme { .. } | EstimatorSpec::BKmse { .. } => Ok(()),
            EstimatorSpec::RKmse { lambda, .. } | EstimatorSpec::SKmse { lambda, .. } => {
                let s_kmse = matches!(self, EstimatorSpec::SKmse { .. });
                match lambda {
                    LambdaRule::Loocv { grid: Some(_) } if !s_kmse => {
                        bad("R-KMSE uses the closed-form minimiser; a lambda grid is not accepted".into())
                    }
                    LambdaRule::Loocv { grid: Some(g) } => {
                        if g.is_empty() || g.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                            bad("lambda grid must be nonempty and positive".into())
                        } else {
                            Ok(())
                        }
                    }
                    LambdaRule::Loocv { grid: None } => Ok(()),
                    LambdaRule::Fixed { value: v } | LambdaRule::Gamma0 { factor: v } | LambdaRule::Rate { c: v } => {
                        let ok = v.is_finite() && if s_kmse { *v > 0.0 } else { *v >= 0.0 };
                        if ok {
                            Ok(())
                        } else {
                            bad(format!("lambda parameter {v} out of range"))
                        }
                    }
                }
            }
            EstimatorSpec::Shrink { target, alpha, .. } => {
                if let ShrinkTarget::Atom { point, scale } = target {
                    if point.len() != dim {
                        return bad(format!("target point has dimension {}, expected {dim}", point.len()));
                    }
                    if !scale.is_finite() || point.iter().any(|v| !v.is_finite()) {
                        return bad("target must be finite".into());
                    }
                }
                match alpha {
                    AlphaRule::Fixed { value } if !(0.0..2.0).contains(value) => {
                        bad(format!("alpha {value} outside [0, 2)"))
                    }
                    AlphaRule::BoundFraction { fraction } if !(0.0..=1.0).contains(fraction) => {
                        bad(format!("bound fraction {fraction} outside [0, 1]"))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    /// Replace the tunable `alpha` parameter. Only the generic shrinker has one;
    /// a fixed rule takes `v` as alpha, a bound-fraction rule as the fraction,
    /// and the empirical rule becomes fixed.
    pub fn with_alpha_param(&self, v: f64) -> Option<Self> {
        match self {
            EstimatorSpec::Shrink { id, target, alpha, positive_part } => {
                let alpha = match alpha {
                    AlphaRule::BoundFraction { .. } => AlphaRule::BoundFraction { fraction: v },
                    _ => AlphaRule::Fixed { value: v },
                };
                Some(EstimatorSpec::Shrink {
                    id: id.clone(),
                    target: target.clone(),
                    alpha,
                    positive_part: *positive_part,
                })
            }
            _ => None,
        }
    }

    /// Replace the tunable `lambda` parameter of R-KMSE / S-KMSE: the value,
    /// the eigenvalue factor or the rate constant, depending on the rule.
    /// A LOOCV rule becomes fixed.
    pub fn with_lambda_param(&self, v: f64) -> Option<Self> {
        let swap = |rule: &LambdaRule| match rule {
            LambdaRule::Gamma0 { .. } => LambdaRule::Gamma0 { factor: v },
            LambdaRule::Rate { .. } => LambdaRule::Rate { c: v },
            _ => LambdaRule::Fixed { value: v },
        };
        match self {
            EstimatorSpec::RKmse { id, lambda } => Some(EstimatorSpec::RKmse { id: id.clone(), lambda: swap(lambda) }),
            EstimatorSpec::SKmse { id, lambda } => Some(EstimatorSpec::SKmse { id: id.clone(), lambda: swap(lambda) }),
            _ => None,
        }
    }

    /// Fit on sample `x` with Gram matrix `k` under kernel `spec`.
    pub fn fit(&self, k: &GramMatrix, x: &Points, spec: &KernelSpec) -> Result<Fitted> {
        let n = x.nrows();
        if k.n() != n {
            return Err(KmseError::DimensionMismatch { expected: k.n(), got: n });
        }
        if n < self.min_sample() {
            return Err(KmseError::InsufficientSample { required: self.min_sample(), got: n });
        }
        let nf = n as f64;
        let uniform = |scale: f64| Estimate::Weights(DVector::from_element(n, scale / nf));
        match self {
            EstimatorSpec::Kme { .. } => Ok(Fitted { alpha: None, lambda: None, estimate: uniform(1.0) }),
            EstimatorSpec::BKmse { .. } => {
                let a = b_kmse_alpha(k)?;
                Ok(Fitted { alpha: Some(a), lambda: None, estimate: uniform(1.0 - a) })
            }
            EstimatorSpec::RKmse { lambda, .. } => {
                let l = match lambda {
                    LambdaRule::Loocv { .. } => r_kmse_lambda(k)?,
                    rule => resolve_lambda(rule, k)?,
                };
                Ok(Fitted {
                    alpha: Some(l / (1.0 + l)),
                    lambda: Some(l),
                    estimate: uniform(1.0 / (1.0 + l)),
                })
            }
            EstimatorSpec::SKmse { lambda, .. } => {
                let l = match lambda {
                    LambdaRule::Loocv { grid: Some(g) } => s_kmse_select_lambda(k, g)?,
                    LambdaRule::Loocv { grid: None } => s_kmse_select_lambda(k, &default_lambda_grid(k)?)?,
                    rule => resolve_lambda(rule, k)?,
                };
                Ok(Fitted { alpha: None, lambda: Some(l), estimate: Estimate::Weights(s_kmse_weights(k, l)?) })
            }
            EstimatorSpec::Shrink { target, alpha, positive_part, .. } => {
                let f_star = target.expansion(x.ncols());
                let a = match alpha {
                    AlphaRule::Fixed { value } => *value,
                    AlphaRule::Empirical => empirical_alpha(k, x, &f_star, spec)?,
                    AlphaRule::BoundFraction { fraction } => 2.0 * fraction * empirical_alpha(k, x, &f_star, spec)?,
                };
                if !(0.0..2.0).contains(&a) {
                    return Err(KmseError::InvalidArgument(format!("shrinkage alpha {a} outside [0, 2)")));
                }
                let estimate = match target {
                    ShrinkTarget::Zero => {
                        let keep = 1.0 - a;
                        uniform(if *positive_part { keep.max(0.0) } else { keep })
                    }
                    ShrinkTarget::Atom { .. } => {
                        Estimate::Expansion(generic_shrinkage(&kme(x)?, &f_star, a, *positive_part)?)
                    }
                };
                Ok(Fitted { alpha: Some(a), lambda: None, estimate })
            }
        }
    }
}

fn resolve_lambda(rule: &LambdaRule, k: &GramMatrix) -> Result<f64> {
    Ok(match rule {
        LambdaRule::Fixed { value } => *value,
        LambdaRule::Gamma0 { factor } => {
            let g0 = k
                .smallest_nonzero_eigenvalue()
                .ok_or_else(|| KmseError::Degenerate("Gram matrix has no positive eigenvalue".into()))?;
            factor * g0
        }
        LambdaRule::Rate { c } => c / (k.n() as f64).sqrt(),
        LambdaRule::Loocv { .. } => unreachable!("handled by the caller"),
    })
}

/// `D^ / (D^ + |f* - mu^|^2)`.
fn empirical_alpha(k: &GramMatrix, x: &Points, f_star: &FunctionExpansion, spec: &KernelSpec) -> Result<f64> {
    let delta = empirical_risk_hat(k)?;
    let rho = GramStats::of(k).rho;
    let dist = if f_star.is_empty() {
        rho
    } else {
        let mu_hat = FunctionExpansion::new(x.clone(), DVector::from_element(x.nrows(), 1.0 / x.nrows() as f64))?;
        (f_star.norm2(spec)? - 2.0 * f_star.inner(&mu_hat, spec)? + rho).max(0.0)
    };
    let denom = delta + dist;
    if !(denom > 0.0) {
        return Err(KmseError::Degenerate("D^ + |f* - mu^|^2 is zero".into()));
    }
    Ok(delta / denom)
}
