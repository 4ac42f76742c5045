//! Kernel mean estimators.
//!
//! Every estimator returns weights over the observed sample, so an estimate
//! is `sum_j w_j k(x_j, .)`:
//!
//! | estimator | weights |
//! |-----------|---------|
//! | KME       | `1/n` |
//! | B-KMSE    | `(1 - alpha~)/n`, `alpha~ = D^/(D^ + |mu^|^2)` |
//! | R-KMSE    | `1/(n(1 + lambda_r))`, `lambda_r` the closed-form LOOCV minimiser |
//! | S-KMSE    | `(K + n lambda I)^{-1} K 1_n` |
//!
//! The uniform shrinkers are written in terms of the two Gram statistics
//! `rho = 1^T K 1 / n^2` (the squared norm of the empirical mean) and
//! `varrho = tr(K) / n`.

mod descriptor;
mod loocv;
mod spectral;

pub use descriptor::{AlphaRule, Estimate, EstimatorSpec, Fitted, LambdaRule, ShrinkTarget};
pub use loocv::{
    default_lambda_grid, r_kmse_loocv_score, s_kmse_loocv_score, s_kmse_loocv_score_naive,
    s_kmse_select_lambda,
    LOOCV_GRID_POINTS, LOOCV_GRID_RANGE,
};
pub use spectral::{
    covariance_operator_eigenpairs, s_kmse_weights, s_kmse_weights_operator,
    s_kmse_weights_spectral, CovarianceEigenpair,
};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{KmseError, Result};
use crate::expansion::FunctionExpansion;
use crate::kernels::{GramMatrix, Points};

/// How a shrinkage parameter was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionMethod {
    Fixed,
    EmpiricalBound,
    LoocvClosedForm,
    LoocvGrid,
}

/// Shrinkage amount of a uniform shrinker. When `lambda` is present,
/// `alpha = lambda / (1 + lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageSelection {
    pub alpha: f64,
    pub lambda: Option<f64>,
    pub method: SelectionMethod,
}

impl ShrinkageSelection {
    pub fn from_lambda(lambda: f64, method: SelectionMethod) -> Self {
        Self {
            alpha: lambda / (1.0 + lambda),
            lambda: Some(lambda),
            method,
        }
    }
}

/// `rho` and `varrho` of a Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramStats {
    pub n: usize,
    /// `(1/n^2) sum_ij K_ij`, equal to `|mu^|^2`.
    pub rho: f64,
    /// `(1/n) sum_i K_ii`.
    pub varrho: f64,
}

impl GramStats {
    pub fn of(k: &GramMatrix) -> Self {
        let n = k.n();
        let nf = n as f64;
        Self {
            n,
            rho: k.sum() / (nf * nf),
            varrho: k.trace() / nf,
        }
    }

    /// U-statistic estimate of `E k(x, x~)`, i.e. the off-diagonal mean.
    pub fn off_diagonal_mean(&self) -> f64 {
        let nf = self.n as f64;
        (nf * self.rho - self.varrho) / (nf - 1.0)
    }
}

fn uniform_weights(n: usize, scale: f64) -> DVector<f64> {
    DVector::from_element(n, scale / n as f64)
}

fn check_sample(k: &GramMatrix, x: &Points) -> Result<()> {
    if k.n() != x.nrows() {
        return Err(KmseError::DimensionMismatch {
            expected: k.n(),
            got: x.nrows(),
        });
    }
    Ok(())
}

/// The empirical kernel mean `(1/n) sum_i k(x_i, .)`.
pub fn kme(x: &Points) -> Result<FunctionExpansion> {
    let n = x.nrows();
    if n == 0 {
        return Err(KmseError::InsufficientSample { required: 1, got: 0 });
    }
    FunctionExpansion::new(x.clone(), uniform_weights(n, 1.0))
}

/// `D^ = (E^k(x,x) - E^k(x,x~)) / n`, the plug-in estimate of the KME risk.
///
/// Values within `1e-14` of zero (relative to the diagonal mean) are clamped
/// to zero, so Dirac-like samples give exactly zero.
pub fn empirical_risk_hat(k: &GramMatrix) -> Result<f64> {
    let n = k.n();
    if n < 2 {
        return Err(KmseError::InsufficientSample { required: 2, got: n });
    }
    let kk = k.entries();
    let diag: f64 = (0..n).map(|i| kk[(i, i)]).sum::<f64>() / n as f64;
    let mut off = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                off += kk[(i, j)];
            }
        }
    }
    let off = off / (n * (n - 1)) as f64;
    let delta = (diag - off) / n as f64;
    if delta.abs() < 1e-14 * diag.abs().max(1.0) {
        Ok(0.0)
    } else {
        Ok(delta)
    }
}

/// B-KMSE: `(1 - alpha~) mu^` with `alpha~ = D^ / (D^ + |mu^|^2)` (target `f* = 0`).
pub fn b_kmse(k: &GramMatrix, x: &Points) -> Result<(ShrinkageSelection, FunctionExpansion)> {
    check_sample(k, x)?;
    let alpha = b_kmse_alpha(k)?;
    let sel = ShrinkageSelection {
        alpha,
        lambda: None,
        method: SelectionMethod::EmpiricalBound,
    };
    let est = FunctionExpansion::new(x.clone(), uniform_weights(k.n(), 1.0 - alpha))?;
    Ok((sel, est))
}

pub fn b_kmse_alpha(k: &GramMatrix) -> Result<f64> {
    let delta = empirical_risk_hat(k)?;
    let norm2 = GramStats::of(k).rho;
    if delta < 0.0 {
        return Err(KmseError::InvalidArgument(format!(
            "empirical risk is negative ({delta}); Gram matrix is not PSD"
        )));
    }
    let denom = delta + norm2;
    if !(denom > 0.0) {
        return Err(KmseError::Degenerate(
            "D^ + |mu^|^2 is zero (all-zero Gram matrix)".into(),
        ));
    }
    Ok(delta / denom)
}

/// Closed-form LOOCV minimiser `lambda_r = n(varrho - rho) / ((n-1)(n rho - varrho))`.
pub fn r_kmse_lambda(k: &GramMatrix) -> Result<f64> {
    let n = k.n();
    if n < 2 {
        return Err(KmseError::InsufficientSample { required: 2, got: n });
    }
    let GramStats { rho, varrho, .. } = GramStats::of(k);
    let nf = n as f64;
    let n_rho = nf * rho;
    if !(n_rho > varrho) {
        return Err(KmseError::RkmsePrecondition { n_rho, varrho });
    }
    let lambda = nf * (varrho - rho) / ((nf - 1.0) * (n_rho - varrho));
    // varrho >= rho for any PSD matrix; small negatives are rounding.
    Ok(lambda.max(0.0))
}

/// R-KMSE: `mu^ / (1 + lambda_r)`.
pub fn r_kmse(k: &GramMatrix, x: &Points) -> Result<(ShrinkageSelection, FunctionExpansion)> {
    check_sample(k, x)?;
    let lambda = r_kmse_lambda(k)?;
    r_kmse_with(x, ShrinkageSelection::from_lambda(lambda, SelectionMethod::LoocvClosedForm))
}

/// `mu^ / (1 + lambda)` for a caller-chosen `lambda >= 0`.
pub fn r_kmse_fixed(x: &Points, lambda: f64) -> Result<(ShrinkageSelection, FunctionExpansion)> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(KmseError::InvalidArgument(format!(
            "R-KMSE lambda must be nonnegative, got {lambda}"
        )));
    }
    r_kmse_with(x, ShrinkageSelection::from_lambda(lambda, SelectionMethod::Fixed))
}

fn r_kmse_with(
    x: &Points,
    sel: ShrinkageSelection,
) -> Result<(ShrinkageSelection, FunctionExpansion)> {
    let lambda = sel.lambda.unwrap_or(0.0);
    let est = FunctionExpansion::new(x.clone(), uniform_weights(x.nrows(), 1.0 / (1.0 + lambda)))?;
    Ok((sel, est))
}

/// S-KMSE estimate for a given `lambda > 0`.
pub fn s_kmse(k: &GramMatrix, x: &Points, lambda: f64) -> Result<FunctionExpansion> {
    check_sample(k, x)?;
    FunctionExpansion::new(x.clone(), s_kmse_weights(k, lambda)?)
}

/// `alpha f* + (1 - alpha) mu^`, or its positive-part version which drops
/// the `mu^` term once `alpha > 1`.
pub fn generic_shrinkage(
    mu_hat: &FunctionExpansion,
    f_star: &FunctionExpansion,
    alpha: f64,
    positive_part: bool,
) -> Result<FunctionExpansion> {
    if !(0.0..2.0).contains(&alpha) {
        return Err(KmseError::InvalidArgument(format!(
            "shrinkage alpha must lie in [0, 2), got {alpha}"
        )));
    }
    let mut keep = 1.0 - alpha;
    if positive_part && keep < 0.0 {
        keep = 0.0;
    }
    let target = if alpha == 0.0 || f_star.is_empty() {
        FunctionExpansion::zero(mu_hat.dim())
    } else {
        f_star.scaled(alpha)
    };
    if keep == 0.0 {
        if target.is_empty() {
            return Ok(FunctionExpansion::zero(mu_hat.dim()));
        }
        return Ok(target);
    }
    target.concat(&mu_hat.scaled(keep))
}
