//! S-KMSE weights, `(K + n lambda I)^{-1} K 1_n`, three ways: a Cholesky
//! solve (the production path), Tikhonov filtering of the Gram eigenbasis,
//! and filtering of the empirical covariance operator's eigenfunctions.

use nalgebra::{DMatrix, DVector};

use crate::error::{KmseError, Result};
use crate::kernels::GramMatrix;

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(KmseError::InvalidArgument(format!(
            "S-KMSE requires lambda > 0, got {lambda}"
        )));
    }
    Ok(())
}

/// `(K + n lambda I)^{-1} K 1_n` with `1_n = (1/n, ..., 1/n)`, solved by Cholesky.
pub fn s_kmse_weights(k: &GramMatrix, lambda: f64) -> Result<DVector<f64>> {
    check_lambda(lambda)?;
    let n = k.n();
    let kk = k.entries();
    let shifted = kk + DMatrix::identity(n, n) * (n as f64 * lambda);
    let chol = shifted
        .cholesky()
        .ok_or(KmseError::NotPositiveDefinite { n, lambda })?;
    let rhs = kk * DVector::from_element(n, 1.0 / n as f64);
    let w = chol.solve(&rhs);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(KmseError::NotPositiveDefinite { n, lambda });
    }
    Ok(w)
}

/// Same weights from the Gram eigensystem `K = U diag(g) U^T`:
/// `w = sum_i g_i / (g_i + n lambda) (u_i^T 1_n) u_i`.
pub fn s_kmse_weights_spectral(k: &GramMatrix, lambda: f64) -> Result<DVector<f64>> {
    check_lambda(lambda)?;
    let n = k.n();
    let nl = n as f64 * lambda;
    let eig = k.eigen();
    let mut w = DVector::zeros(n);
    for (i, &g) in eig.eigenvalues.iter().enumerate() {
        let u = eig.eigenvectors.column(i);
        let filter = g / (g + nl);
        let coord = u.sum() / n as f64;
        w.axpy(filter * coord, &u, 1.0);
    }
    Ok(w)
}

/// One eigenpair of the empirical covariance operator
/// `S = (1/n) sum_i k(., x_i) (x) k(., x_i)`.
///
/// The eigenfunction is `phi = sum_j coeffs_j k(., x_j)`, normalised to unit
/// RKHS norm.
#[derive(Debug, Clone)]
pub struct CovarianceEigenpair {
    pub value: f64,
    pub coeffs: DVector<f64>,
}

/// Nonzero eigenpairs of the empirical covariance operator. If
/// `K u = g u` then `S (Phi u) = (g/n) Phi u` and `|Phi u|^2 = g`.
pub fn covariance_operator_eigenpairs(k: &GramMatrix) -> Vec<CovarianceEigenpair> {
    let n = k.n() as f64;
    let eig = k.eigen();
    let max = eig.eigenvalues.max();
    eig.eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &g)| g > 1e-12 * max.max(0.0))
        .map(|(i, &g)| CovarianceEigenpair {
            value: g / n,
            coeffs: eig.eigenvectors.column(i) / g.sqrt(),
        })
        .collect()
}

/// Weights of `sum_i gamma_i/(gamma_i + lambda) <mu^, phi_i> phi_i`, where
/// `(gamma_i, phi_i)` are the covariance operator's eigenpairs and inner
/// products are taken in the RKHS through `K`.
pub fn s_kmse_weights_operator(k: &GramMatrix, lambda: f64) -> Result<DVector<f64>> {
    check_lambda(lambda)?;
    let n = k.n();
    let kk = k.entries();
    let mu_hat = DVector::from_element(n, 1.0 / n as f64);
    let k_mu = kk * &mu_hat;
    let mut w = DVector::zeros(n);
    for pair in covariance_operator_eigenpairs(k) {
        // <mu^, phi>_H = mu_hat^T K coeffs
        let proj = k_mu.dot(&pair.coeffs);
        let filter = pair.value / (pair.value + lambda);
        w.axpy(filter * proj, &pair.coeffs, 1.0);
    }
    Ok(w)
}
