//! Leave-one-out cross-validation scores.
//!
//! The score of an estimator `mu^_(-i)` fitted without `x_i` is
//! `(1/n) sum_i |k(., x_i) - mu^_(-i)|_H^2`.

use nalgebra::{DMatrix, DVector};

use super::spectral::s_kmse_weights;
use crate::error::{KmseError, Result};
use crate::kernels::GramMatrix;

pub const LOOCV_GRID_POINTS: usize = 30;
/// Multiples of the smallest nonzero Gram eigenvalue spanned by the default grid.
pub const LOOCV_GRID_RANGE: (f64, f64) = (1e-4, 1e2);

const SINGULAR_TOLERANCE: f64 = 1e-12;

/// LOOCV score of the uniform shrinker `mu^_(-i) = (1 - alpha) mu^_(-i)`,
/// `alpha = lambda / (1 + lambda)`, evaluated from its definition.
pub fn r_kmse_loocv_score(k: &GramMatrix, lambda: f64) -> Result<f64> {
    let n = k.n();
    if n < 2 {
        return Err(KmseError::InsufficientSample { required: 2, got: n });
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(KmseError::InvalidArgument(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let kk = k.entries();
    let c = 1.0 / ((1.0 + lambda) * (n - 1) as f64);
    let total = kk.sum();
    let row_sums: Vec<f64> = (0..n).map(|i| kk.row(i).sum()).collect();
    let mut score = 0.0;
    for i in 0..n {
        // sum over j, l != i of K_jl, and sum over j != i of K_ij
        let block = total - 2.0 * row_sums[i] + kk[(i, i)];
        let cross = row_sums[i] - kk[(i, i)];
        score += c * c * block - 2.0 * c * cross + kk[(i, i)];
    }
    Ok(score / n as f64)
}

/// Closed-form LOOCV score of S-KMSE at shrinkage `lambda`.
///
/// With `lambda_n = (n-1) lambda` and `R = (K + lambda_n I)^{-1}`, the
/// estimate fitted without `x_i` is `(1/(n-1)) Phi R c_i` where
///
/// ```text
/// c_i = K1 - k_i - e_i k_i^T 1 + e_i K_ii
///       + e_i [k_i^T R K 1 - k_i^T R k_i - d_i k_i^T 1 + d_i K_ii] / (1 - d_i),
/// d_i = k_i^T R e_i,
/// ```
///
/// giving `(1/n) tr(R K R A) - (2/n) tr(R B) + (1/n) tr K` with
/// `A = sum_i c_i c_i^T / (n-1)^2` and `B = sum_i c_i k_i^T / (n-1)`.
pub fn s_kmse_loocv_score(k: &GramMatrix, lambda: f64) -> Result<f64> {
    let n = k.n();
    if n < 2 {
        return Err(KmseError::InsufficientSample { required: 2, got: n });
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(KmseError::InvalidArgument(format!(
            "S-KMSE requires lambda > 0, got {lambda}"
        )));
    }
    let kk = k.entries();
    let nf = n as f64;
    let lambda_n = (nf - 1.0) * lambda;
    let shifted = kk + DMatrix::identity(n, n) * lambda_n;
    let r = shifted
        .cholesky()
        .ok_or(KmseError::NotPositiveDefinite { n, lambda })?
        .inverse();

    let ones = DVector::from_element(n, 1.0);
    let k1 = kk * &ones;
    let rk = &r * kk;
    let rk1 = &rk * &ones;

    // Column i of C is c_i.
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        let ki = kk.column(i);
        let kii = kk[(i, i)];
        let ki_1 = k1[i];
        let d = rk[(i, i)];
        if (1.0 - d).abs() < SINGULAR_TOLERANCE {
            return Err(KmseError::SingularLeaveOneOut { index: i, lambda });
        }
        let ki_rk1 = ki.dot(&rk1);
        let ki_rki = ki.dot(&rk.column(i));
        let mut col = &k1 - ki;
        col[i] += -ki_1 + kii + (ki_rk1 - ki_rki - d * ki_1 + d * kii) / (1.0 - d);
        c.set_column(i, &col);
    }
    let a = &c * c.transpose() / ((nf - 1.0) * (nf - 1.0));
    let b = &c * kk / (nf - 1.0);
    let rkr = &rk * &r;
    let t1 = rkr.component_mul(&a.transpose()).sum();
    let t2 = r.component_mul(&b.transpose()).sum();
    let score = t1 / nf - 2.0 * t2 / nf + kk.trace() / nf;
    if !score.is_finite() {
        return Err(KmseError::SingularLeaveOneOut { index: 0, lambda });
    }
    Ok(score)
}

/// Reference S-KMSE LOOCV score: refits on each `(n-1)`-point Gram matrix.
///
/// O(n^4); used to cross-check [`s_kmse_loocv_score`].
pub fn s_kmse_loocv_score_naive(k: &GramMatrix, lambda: f64) -> Result<f64> {
    let n = k.n();
    if n < 2 {
        return Err(KmseError::InsufficientSample { required: 2, got: n });
    }
    let kk = k.entries();
    let mut total = 0.0;
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let sub = GramMatrix::from_matrix(kk.select_rows(&keep).select_columns(&keep))?;
        let w = s_kmse_weights(&sub, lambda)?;
        let cross: f64 = keep.iter().zip(w.iter()).map(|(&j, wj)| wj * kk[(i, j)]).sum();
        let norm2 = w.dot(&(sub.entries() * &w));
        total += kk[(i, i)] - 2.0 * cross + norm2;
    }
    Ok(total / n as f64)
}

/// `LOOCV_GRID_POINTS` log-spaced values spanning `LOOCV_GRID_RANGE` times the
/// smallest nonzero eigenvalue of `K`.
pub fn default_lambda_grid(k: &GramMatrix) -> Result<Vec<f64>> {
    let gamma0 = k
        .smallest_nonzero_eigenvalue()
        .ok_or_else(|| KmseError::Degenerate("Gram matrix has no positive eigenvalue".into()))?;
    let (lo, hi) = LOOCV_GRID_RANGE;
    Ok(log_grid(lo * gamma0, hi * gamma0, LOOCV_GRID_POINTS))
}

pub(crate) fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Grid value minimising the S-KMSE LOOCV score; ties go to the smaller lambda.
/// Grid points where the score cannot be evaluated are skipped.
pub fn s_kmse_select_lambda(k: &GramMatrix, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(KmseError::InvalidArgument("empty lambda grid".into()));
    }
    if let Some(bad) = grid.iter().find(|&&l| !(l.is_finite() && l > 0.0)) {
        return Err(KmseError::InvalidArgument(format!(
            "lambda grid values must be positive, got {bad}"
        )));
    }
    let mut best: Option<(f64, f64)> = None;
    for &lambda in grid {
        let score = match s_kmse_loocv_score(k, lambda) {
            Ok(s) => s,
            Err(e) => {
                log::debug!("skipping lambda = {lambda}: {e}");
                continue;
            }
        };
        best = match best {
            Some((bs, bl)) if bs < score || (bs == score && bl <= lambda) => Some((bs, bl)),
            _ => Some((score, lambda)),
        };
    }
    best.map(|(_, l)| l).ok_or(KmseError::SelectionFailed)
}
