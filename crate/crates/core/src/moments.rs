//! Closed-form kernel expectations under Gaussian mixtures.
//!
//! For `P = sum_c pi_c N(theta_c, Sigma_c)` observed through isotropic noise
//! `N(0, noise_var I)`, every component is Gaussian with effective covariance
//! `S_c = Sigma_c + noise_var I`, and all expectations below are exact:
//!
//! * `mu_P(y) = E_x k(x, y)`, the true kernel mean evaluated at `y`;
//! * `|mu_P|^2 = E k(x, x~)` for independent `x, x~ ~ P`;
//! * `E k(x, x)`, which together with the above gives the KME risk.
//!
//! RBF terms are Gaussian convolutions; polynomial terms come from the moments
//! of Gaussian quadratic and bilinear forms up to order three.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{KmseError, Result};
use crate::expansion::{clamp_squared_norm, FunctionExpansion};
use crate::kernels::{KernelSpec, Points};

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// `M` with `cov = M M^T`, possibly rectangular (rank-deficient covariances).
    factor: Option<DMatrix<f64>>,
}

impl MixtureComponent {
    pub fn new(weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self {
            weight,
            mean,
            cov,
            factor: None,
        }
    }

    /// Component whose covariance is `factor * factor^T`.
    pub fn from_factor(weight: f64, mean: DVector<f64>, factor: DMatrix<f64>) -> Self {
        let cov = &factor * factor.transpose();
        Self {
            weight,
            mean,
            cov,
            factor: Some(factor),
        }
    }

    /// A square-root factor of the covariance. Uses the stored factor when
    /// there is one; otherwise a symmetric eigendecomposition, which copes
    /// with singular covariances.
    pub fn covariance_factor(&self) -> DMatrix<f64> {
        if let Some(f) = &self.factor {
            return f.clone();
        }
        let eig = SymmetricEigen::new(self.cov.clone());
        let mut m = eig.eigenvectors;
        for (j, &g) in eig.eigenvalues.iter().enumerate() {
            let s = g.max(0.0).sqrt();
            m.column_mut(j).scale_mut(s);
        }
        m
    }
}

/// Ground-truth mixture of Gaussians with additive isotropic observation noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
    noise_var: f64,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>, noise_var: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(KmseError::InvalidArgument("mixture has no components".into()));
        }
        if !(noise_var.is_finite() && noise_var >= 0.0) {
            return Err(KmseError::InvalidArgument(format!(
                "noise variance must be nonnegative, got {noise_var}"
            )));
        }
        let d = components[0].mean.len();
        if d == 0 {
            return Err(KmseError::InvalidArgument("mixture dimension must be >= 1".into()));
        }
        let mut total = 0.0;
        for (i, c) in components.iter().enumerate() {
            if !(c.weight.is_finite() && (0.0..=1.0).contains(&c.weight)) {
                return Err(KmseError::InvalidArgument(format!(
                    "component {i} weight {} outside [0, 1]",
                    c.weight
                )));
            }
            total += c.weight;
            if c.mean.len() != d {
                return Err(KmseError::DimensionMismatch { expected: d, got: c.mean.len() });
            }
            if c.cov.nrows() != d || c.cov.ncols() != d {
                return Err(KmseError::DimensionMismatch { expected: d, got: c.cov.nrows() });
            }
            check_psd(&c.cov, i)?;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(KmseError::InvalidArgument(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { components, noise_var })
    }

    /// `N(mean, cov)` with no observation noise.
    pub fn gaussian(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![MixtureComponent::new(1.0, mean, cov)], 0.0)
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    /// `sum_c pi_c theta_c`.
    pub fn mean(&self) -> DVector<f64> {
        self.components
            .iter()
            .fold(DVector::zeros(self.dim()), |acc, c| acc + &c.mean * c.weight)
    }

    /// Covariance of the observed variable, including the noise.
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.mean();
        let d = self.dim();
        let mut s = DMatrix::identity(d, d) * self.noise_var;
        for c in &self.components {
            let dm = &c.mean - &m;
            s += (&c.cov + &dm * dm.transpose()) * c.weight;
        }
        s
    }

    fn effective_cov(&self, c: &MixtureComponent) -> DMatrix<f64> {
        let d = self.dim();
        &c.cov + DMatrix::identity(d, d) * self.noise_var
    }
}

fn check_psd(cov: &DMatrix<f64>, index: usize) -> Result<()> {
    let d = cov.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 * cov[(i, j)].abs().max(1.0) {
                return Err(KmseError::InvalidArgument(format!(
                    "component {index} covariance is not symmetric"
                )));
            }
        }
    }
    let ev = SymmetricEigen::new(cov.clone()).eigenvalues;
    let max = ev.max().max(0.0);
    if ev.min() < -1e-8 * max.max(1e-300) {
        return Err(KmseError::InvalidArgument(format!(
            "component {index} covariance is not PSD (smallest eigenvalue {})",
            ev.min()
        )));
    }
    Ok(())
}

struct PreparedComponent {
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    /// Cholesky of `S + sigma^2 I` (RBF only).
    rbf_chol: Option<Cholesky<f64, Dyn>>,
    /// `(d/2) ln sigma^2 - (1/2) ln det(S + sigma^2 I)` (RBF only).
    rbf_log_scale: f64,
}

/// Exact kernel-mean quantities for one kernel and one mixture.
pub struct GroundTruth {
    spec: KernelSpec,
    dim: usize,
    parts: Vec<PreparedComponent>,
    norm2: f64,
    diag: f64,
}

impl GroundTruth {
    pub fn new(spec: &KernelSpec, p: &GaussianMixture) -> Result<Self> {
        spec.validate()?;
        let d = p.dim();
        let mut parts = Vec::with_capacity(p.components.len());
        for (i, c) in p.components.iter().enumerate() {
            let cov = p.effective_cov(c);
            let (rbf_chol, rbf_log_scale) = match *spec {
                KernelSpec::Rbf { sigma2 } => {
                    let shifted = &cov + DMatrix::identity(d, d) * sigma2;
                    let chol = shifted.cholesky().ok_or_else(|| {
                        KmseError::InvalidArgument(format!(
                            "component {i}: S + sigma^2 I is not positive definite"
                        ))
                    })?;
                    let logdet = log_det(&chol);
                    (Some(chol), 0.5 * d as f64 * sigma2.ln() - 0.5 * logdet)
                }
                _ => (None, 0.0),
            };
            parts.push(PreparedComponent {
                weight: c.weight,
                mean: c.mean.clone(),
                cov,
                rbf_chol,
                rbf_log_scale,
            });
        }
        let mut gt = Self {
            spec: *spec,
            dim: d,
            parts,
            norm2: 0.0,
            diag: 0.0,
        };
        gt.norm2 = gt.compute_norm2()?;
        gt.diag = gt.compute_diag();
        Ok(gt)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// `mu_P(y) = E_{x ~ P} k(x, y)`.
    pub fn mean_embedding_at(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return Err(KmseError::DimensionMismatch { expected: self.dim, got: y.len() });
        }
        let y = DVector::from_column_slice(y);
        Ok(self.parts.iter().map(|c| c.weight * self.component_at(c, &y)).sum())
    }

    /// `mu_P` evaluated at every row of `x`.
    pub fn mean_embedding_at_rows(&self, x: &Points) -> Result<DVector<f64>> {
        if x.nrows() > 0 && x.ncols() != self.dim {
            return Err(KmseError::DimensionMismatch { expected: self.dim, got: x.ncols() });
        }
        Ok(DVector::from_fn(x.nrows(), |i, _| {
            let y = x.row(i).transpose();
            self.parts.iter().map(|c| c.weight * self.component_at(c, &y)).sum()
        }))
    }

    fn component_at(&self, c: &PreparedComponent, y: &DVector<f64>) -> f64 {
        match self.spec {
            KernelSpec::Rbf { .. } => {
                let diff = y - &c.mean;
                let chol = c.rbf_chol.as_ref().expect("prepared for RBF");
                let q = diff.dot(&chol.solve(&diff));
                (c.rbf_log_scale - 0.5 * q).exp()
            }
            _ => {
                // s = x^T y ~ N(m, v)
                let m = c.mean.dot(y);
                let v = y.dot(&(&c.cov * y));
                match self.spec {
                    KernelSpec::Linear => m,
                    KernelSpec::Poly2 => m * m + v + 2.0 * m + 1.0,
                    KernelSpec::Poly3 => m.powi(3) + 3.0 * m * v + 3.0 * (m * m + v) + 3.0 * m + 1.0,
                    KernelSpec::Rbf { .. } => unreachable!(),
                }
            }
        }
    }

    /// `|mu_P|^2 = E k(x, x~)`.
    pub fn norm2(&self) -> f64 {
        self.norm2
    }

    /// `E k(x, x)`.
    pub fn diag_expectation(&self) -> f64 {
        self.diag
    }

    fn compute_norm2(&self) -> Result<f64> {
        let mut total = 0.0;
        for a in &self.parts {
            for b in &self.parts {
                total += a.weight * b.weight * self.pair_expectation(a, b)?;
            }
        }
        Ok(total)
    }

    /// `E k(x, x~)` for `x ~ N(a.mean, a.cov)`, `x~ ~ N(b.mean, b.cov)` independent.
    fn pair_expectation(&self, a: &PreparedComponent, b: &PreparedComponent) -> Result<f64> {
        let d = self.dim;
        Ok(match self.spec {
            KernelSpec::Rbf { sigma2 } => {
                let shifted = &a.cov + &b.cov + DMatrix::identity(d, d) * sigma2;
                let chol = shifted.cholesky().ok_or_else(|| {
                    KmseError::InvalidArgument("S_c + S_c' + sigma^2 I is not positive definite".into())
                })?;
                let diff = &a.mean - &b.mean;
                let q = diff.dot(&chol.solve(&diff));
                (0.5 * d as f64 * sigma2.ln() - 0.5 * log_det(&chol) - 0.5 * q).exp()
            }
            KernelSpec::Linear => a.mean.dot(&b.mean),
            KernelSpec::Poly2 | KernelSpec::Poly3 => {
                let [s1, s2, s3] = bilinear_moments(&a.mean, &a.cov, &b.mean, &b.cov);
                if matches!(self.spec, KernelSpec::Poly2) {
                    s2 + 2.0 * s1 + 1.0
                } else {
                    s3 + 3.0 * s2 + 3.0 * s1 + 1.0
                }
            }
        })
    }

    fn compute_diag(&self) -> f64 {
        self.parts
            .iter()
            .map(|c| {
                c.weight
                    * match self.spec {
                        KernelSpec::Rbf { .. } => 1.0,
                        KernelSpec::Linear => quadratic_moments(&c.mean, &c.cov)[0],
                        KernelSpec::Poly2 => {
                            let [q1, q2, _] = quadratic_moments(&c.mean, &c.cov);
                            q2 + 2.0 * q1 + 1.0
                        }
                        KernelSpec::Poly3 => {
                            let [q1, q2, q3] = quadratic_moments(&c.mean, &c.cov);
                            q3 + 3.0 * q2 + 3.0 * q1 + 1.0
                        }
                    }
            })
            .sum()
    }

    /// `|sum_j w_j k(u_j, .) - mu_P|^2_H`.
    pub fn true_loss(&self, f: &FunctionExpansion) -> Result<f64> {
        if f.is_empty() {
            return Ok(clamp_squared_norm(self.norm2));
        }
        let fk = f.norm2(&self.spec)?;
        let cross = self.mean_embedding_at_rows(f.points())?.dot(f.weights());
        Ok(clamp_squared_norm(fk - 2.0 * cross + self.norm2))
    }

    /// Loss of weights `w` over a sample whose Gram matrix and `mu_P` values
    /// are already known: `w^T K w - 2 w^T m + |mu_P|^2`.
    pub fn loss_from_parts(&self, gram: &DMatrix<f64>, mu_at_points: &DVector<f64>, w: &DVector<f64>) -> f64 {
        clamp_squared_norm(w.dot(&(gram * w)) - 2.0 * w.dot(mu_at_points) + self.norm2)
    }

    /// Risk of the empirical kernel mean on `n` points,
    /// `(E k(x,x) - E k(x,x~)) / n`.
    pub fn theoretical_risk(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(KmseError::InsufficientSample { required: 1, got: 0 });
        }
        let raw = (self.diag - self.norm2) / n as f64;
        Ok(if raw.abs() < 1e-14 * self.diag.abs().max(1.0) { 0.0 } else { raw })
    }

    /// `|f* - mu_P|^2_H`.
    pub fn distance2_to_mean(&self, f_star: &FunctionExpansion) -> Result<f64> {
        self.true_loss(f_star)
    }

    /// Risk-optimal shrinkage `alpha* = D / (D + |f* - mu|^2)`.
    pub fn optimal_alpha(&self, f_star: &FunctionExpansion, n: usize) -> Result<f64> {
        let delta = self.theoretical_risk(n)?;
        let dist = self.distance2_to_mean(f_star)?;
        let denom = delta + dist;
        if !(denom > 0.0) {
            return Err(KmseError::Degenerate(
                "optimal alpha is undefined: zero risk and f* equals the kernel mean".into(),
            ));
        }
        Ok(delta / denom)
    }

    /// Upper end `2D / (D + |f* - mu|^2)` of the range where shrinkage helps.
    pub fn improvement_boundary(&self, f_star: &FunctionExpansion, n: usize) -> Result<f64> {
        Ok(2.0 * self.optimal_alpha(f_star, n)?)
    }

    /// `D_alpha = alpha^2 |f* - mu|^2 + (1 - alpha)^2 D`.
    pub fn shrinkage_risk(&self, alpha: f64, f_star: &FunctionExpansion, n: usize) -> Result<f64> {
        let delta = self.theoretical_risk(n)?;
        let dist = self.distance2_to_mean(f_star)?;
        Ok(alpha * alpha * dist + (1.0 - alpha) * (1.0 - alpha) * delta)
    }
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// First three raw moments of `q = x^T x` for `x ~ N(m, S)`, from the
/// cumulants `k_r = 2^{r-1} (r-1)! (tr S^r + r m^T S^{r-1} m)`.
pub fn quadratic_moments(m: &DVector<f64>, s: &DMatrix<f64>) -> [f64; 3] {
    let s2 = s * s;
    let s3 = &s2 * s;
    let k1 = s.trace() + m.dot(m);
    let k2 = 2.0 * (s2.trace() + 2.0 * m.dot(&(s * m)));
    let k3 = 8.0 * (s3.trace() + 3.0 * m.dot(&(&s2 * m)));
    [k1, k2 + k1 * k1, k3 + 3.0 * k1 * k2 + k1.powi(3)]
}

/// First three raw moments of `s = x^T y` for independent
/// `x ~ N(a, A)`, `y ~ N(b, B)`, obtained by conditioning on `x`
/// (`s | x ~ N(x^T b, x^T B x)`).
pub fn bilinear_moments(a: &DVector<f64>, sa: &DMatrix<f64>, b: &DVector<f64>, sb: &DMatrix<f64>) -> [f64; 3] {
    let mu = a.dot(b);
    let b_a_b = b.dot(&(sa * b));
    let a_b_a = a.dot(&(sb * a));
    let tr_ab = (sa * sb).trace();
    let a_bab = a.dot(&(sb * (sa * b)));
    let e1 = mu;
    let e2 = mu * mu + b_a_b + a_b_a + tr_ab;
    let e3 = mu.powi(3) + 3.0 * mu * b_a_b + 3.0 * (mu * (a_b_a + tr_ab) + 2.0 * a_bab);
    [e1, e2, e3]
}

/// `E_{x~P} k(x, y)`.
pub fn expected_kernel_at(spec: &KernelSpec, p: &GaussianMixture, y: &[f64]) -> Result<f64> {
    GroundTruth::new(spec, p)?.mean_embedding_at(y)
}

/// `|mu_P|^2 = E k(x, x~)`.
pub fn expected_kernel_double(spec: &KernelSpec, p: &GaussianMixture) -> Result<f64> {
    Ok(GroundTruth::new(spec, p)?.norm2())
}

/// `E_{x~P} k(x, x)`.
pub fn expected_kernel_diag(spec: &KernelSpec, p: &GaussianMixture) -> Result<f64> {
    Ok(GroundTruth::new(spec, p)?.diag_expectation())
}

pub fn true_loss(f: &FunctionExpansion, spec: &KernelSpec, p: &GaussianMixture) -> Result<f64> {
    GroundTruth::new(spec, p)?.true_loss(f)
}

pub fn theoretical_risk(spec: &KernelSpec, p: &GaussianMixture, n: usize) -> Result<f64> {
    GroundTruth::new(spec, p)?.theoretical_risk(n)
}

pub fn optimal_alpha(spec: &KernelSpec, p: &GaussianMixture, f_star: &FunctionExpansion, n: usize) -> Result<f64> {
    GroundTruth::new(spec, p)?.optimal_alpha(f_star, n)
}

pub fn shrinkage_risk(
    alpha: f64,
    spec: &KernelSpec,
    p: &GaussianMixture,
    f_star: &FunctionExpansion,
    n: usize,
) -> Result<f64> {
    GroundTruth::new(spec, p)?.shrinkage_risk(alpha, f_star, n)
}

/// Largest `alpha` that improves on the empirical kernel mean uniformly over
/// the class of distributions with `E k(x,x~) / E k(x,x) <= a`:
///
/// `2(1-A) / (1 + (n-1)A + n|f*|^2/psi0 + 2n sqrt(A) |f*| / sqrt(psi0))`.
pub fn uniform_alpha_bound(a: f64, n: usize, f_star_norm: f64, psi0: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(KmseError::InvalidArgument(format!("A must lie in (0, 1), got {a}")));
    }
    if n == 0 {
        return Err(KmseError::InsufficientSample { required: 1, got: 0 });
    }
    if !(f_star_norm >= 0.0 && f_star_norm.is_finite()) {
        return Err(KmseError::InvalidArgument(format!("|f*| must be nonnegative, got {f_star_norm}")));
    }
    if !(psi0 > 0.0 && psi0.is_finite()) {
        return Err(KmseError::InvalidArgument(format!("psi(0) must be positive, got {psi0}")));
    }
    let nf = n as f64;
    let denom = 1.0 + (nf - 1.0) * a + nf * f_star_norm * f_star_norm / psi0 + 2.0 * nf * a.sqrt() * f_star_norm / psi0.sqrt();
    Ok(2.0 * (1.0 - a) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn std_normal_1d() -> GaussianMixture {
        GaussianMixture::gaussian(DVector::from_element(1, 0.0), DMatrix::identity(1, 1)).unwrap()
    }

    #[test]
    fn rbf_standard_normal_values() {
        let p = std_normal_1d();
        let rbf = KernelSpec::rbf(1.0).unwrap();
        assert_relative_eq!(expected_kernel_at(&rbf, &p, &[0.0]).unwrap(), 0.5f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(expected_kernel_double(&rbf, &p).unwrap(), (1.0f64 / 3.0).sqrt(), epsilon = 1e-14);
        let risk = theoretical_risk(&rbf, &p, 10).unwrap();
        assert_relative_eq!(risk, 0.042265, epsilon = 1e-6);
        assert_relative_eq!(theoretical_risk(&rbf, &p, 20).unwrap(), risk / 2.0, epsilon = 1e-15);
        let zero = FunctionExpansion::zero(1);
        let a = optimal_alpha(&rbf, &p, &zero, 10).unwrap();
        assert_relative_eq!(a, 0.06822, epsilon = 1e-4);
    }

    #[test]
    fn polynomial_point_values() {
        let p = std_normal_1d();
        assert_relative_eq!(expected_kernel_at(&KernelSpec::Poly2, &p, &[1.0]).unwrap(), 2.0, epsilon = 1e-14);
        let theta = DVector::from_vec(vec![1.0, -2.0]);
        let q = GaussianMixture::gaussian(theta.clone(), DMatrix::identity(2, 2) * 3.0).unwrap();
        assert_relative_eq!(expected_kernel_at(&KernelSpec::Linear, &q, &[0.5, 4.0]).unwrap(), 0.5 - 8.0, epsilon = 1e-14);
        assert_relative_eq!(expected_kernel_double(&KernelSpec::Linear, &q).unwrap(), 5.0, epsilon = 1e-14);
        // E|x|^2 = tr S + |theta|^2
        assert_relative_eq!(expected_kernel_diag(&KernelSpec::Linear, &q).unwrap(), 11.0, epsilon = 1e-14);
    }

    #[test]
    fn quadratic_moments_of_chi_square() {
        // x ~ N(0, I_3): q ~ chi^2_3 with raw moments 3, 15, 105.
        let m = quadratic_moments(&DVector::zeros(3), &DMatrix::identity(3, 3));
        assert_eq!(m, [3.0, 15.0, 105.0]);
        // Degenerate Gaussian at m: q = |m|^2 exactly.
        let mu = DVector::from_vec(vec![1.0, 2.0]);
        let m = quadratic_moments(&mu, &DMatrix::zeros(2, 2));
        assert_eq!(m, [5.0, 25.0, 125.0]);
    }

    #[test]
    fn bilinear_moments_degenerate_and_symmetric() {
        let a = DVector::from_vec(vec![1.0, 2.0]);
        let b = DVector::from_vec(vec![-0.5, 3.0]);
        let z = DMatrix::zeros(2, 2);
        let s = a.dot(&b);
        assert_eq!(bilinear_moments(&a, &z, &b, &z), [s, s * s, s * s * s]);
        let sa = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let sb = DMatrix::from_row_slice(2, 2, &[0.5, -0.2, -0.2, 1.5]);
        let l = bilinear_moments(&a, &sa, &b, &sb);
        let r = bilinear_moments(&b, &sb, &a, &sa);
        for i in 0..3 {
            assert_relative_eq!(l[i], r[i], max_relative = 1e-13);
        }
    }

    #[test]
    fn dirac_has_zero_risk() {
        let p = GaussianMixture::gaussian(DVector::from_vec(vec![0.3, -1.0]), DMatrix::zeros(2, 2)).unwrap();
        let rbf = KernelSpec::rbf(0.7).unwrap();
        assert_eq!(theoretical_risk(&rbf, &p, 5).unwrap(), 0.0);
    }

    #[test]
    fn optimal_alpha_undefined_when_target_is_the_mean() {
        let theta = DVector::from_vec(vec![2.0]);
        let p = GaussianMixture::gaussian(theta, DMatrix::zeros(1, 1)).unwrap();
        let f = FunctionExpansion::atom(&[2.0], 1.0);
        assert!(matches!(optimal_alpha(&KernelSpec::Linear, &p, &f, 3), Err(KmseError::Degenerate(_))));
    }

    #[test]
    fn shrinkage_risk_parabola() {
        let p = std_normal_1d();
        let rbf = KernelSpec::rbf(1.0).unwrap();
        let gt = GroundTruth::new(&rbf, &p).unwrap();
        let f = FunctionExpansion::atom(&[0.4], 0.6);
        let n = 10;
        let delta = gt.theoretical_risk(n).unwrap();
        let dist = gt.distance2_to_mean(&f).unwrap();
        let a_star = gt.optimal_alpha(&f, n).unwrap();
        assert!(a_star > 0.0 && a_star < 1.0);
        assert_relative_eq!(gt.shrinkage_risk(0.0, &f, n).unwrap(), delta, epsilon = 1e-15);
        assert_relative_eq!(gt.shrinkage_risk(a_star, &f, n).unwrap(), delta * dist / (delta + dist), max_relative = 1e-12);
        let edge = gt.improvement_boundary(&f, n).unwrap();
        assert_relative_eq!(gt.shrinkage_risk(edge, &f, n).unwrap(), delta, max_relative = 1e-12);
        // Strict convexity, vertex at alpha*.
        let h = 1e-3;
        let r = |a: f64| gt.shrinkage_risk(a, &f, n).unwrap();
        assert!(r(a_star + h) - 2.0 * r(a_star) + r(a_star - h) > 0.0);
        assert!(r(a_star) < r(a_star + h) && r(a_star) < r(a_star - h));
    }

    #[test]
    fn uniform_bound_examples() {
        let a = 0.3;
        let n = 7;
        assert_relative_eq!(
            uniform_alpha_bound(a, n, 0.0, 1.0).unwrap(),
            2.0 * (1.0 - a) / (1.0 + 6.0 * a),
            epsilon = 1e-15
        );
        assert!(uniform_alpha_bound(1.0 - 1e-12, n, 0.5, 1.0).unwrap() < 1e-10);
        assert!(uniform_alpha_bound(0.0, n, 0.0, 1.0).is_err());
        assert!(uniform_alpha_bound(1.0, n, 0.0, 1.0).is_err());
    }

    #[test]
    fn linear_kernel_uniform_bound_improves_centered_gaussian() {
        // theta = 0 puts N(0, s^2 I) in every class, so any A works.
        for &(d, s2, n) in &[(1usize, 1.0, 5usize), (3, 0.4, 10), (5, 2.0, 50)] {
            let p = GaussianMixture::gaussian(DVector::zeros(d), DMatrix::identity(d, d) * s2).unwrap();
            let gt = GroundTruth::new(&KernelSpec::Linear, &p).unwrap();
            let zero = FunctionExpansion::zero(d);
            let delta = gt.theoretical_risk(n).unwrap();
            for a in [0.05, 0.5, 0.95] {
                let bound = uniform_alpha_bound(a, n, 0.0, 1.0).unwrap();
                assert!(gt.shrinkage_risk(bound, &zero, n).unwrap() <= delta);
            }
        }
    }

    #[test]
    fn gaussian_class_membership_ratio() {
        // sigma^2 >= pi tau^2 / A^{2/d} implies E k(x,x~) / E k(x,x) <= A.
        for d in 1..=4 {
            for &a in &[0.1f64, 0.5, 0.9] {
                for &tau2 in &[0.5, 1.0, 3.0] {
                    let s2 = std::f64::consts::PI * tau2 / a.powf(2.0 / d as f64);
                    let p = GaussianMixture::gaussian(DVector::from_element(d, 1.7), DMatrix::identity(d, d) * s2).unwrap();
                    let gt = GroundTruth::new(&KernelSpec::rbf(tau2).unwrap(), &p).unwrap();
                    assert!(gt.norm2() / gt.diag_expectation() <= a + 1e-12);
                }
            }
        }
    }

    #[test]
    fn double_expectation_below_diagonal() {
        let comps = vec![
            MixtureComponent::new(0.3, DVector::from_vec(vec![1.0, 0.0]), DMatrix::identity(2, 2)),
            MixtureComponent::new(0.7, DVector::from_vec(vec![-1.0, 2.0]), DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.2])),
        ];
        let p = GaussianMixture::new(comps, 0.2).unwrap();
        for spec in [KernelSpec::Linear, KernelSpec::Poly2, KernelSpec::Poly3, KernelSpec::rbf(1.5).unwrap()] {
            let gt = GroundTruth::new(&spec, &p).unwrap();
            assert!(gt.norm2() <= gt.diag_expectation());
        }
    }

    #[test]
    fn mixture_validation() {
        let m = DVector::zeros(2);
        let bad_w = vec![MixtureComponent::new(0.5, m.clone(), DMatrix::identity(2, 2))];
        assert!(GaussianMixture::new(bad_w, 0.0).is_err());
        let not_psd = vec![MixtureComponent::new(1.0, m.clone(), -DMatrix::identity(2, 2))];
        assert!(GaussianMixture::new(not_psd, 0.0).is_err());
        let wrong_dim = vec![MixtureComponent::new(1.0, m, DMatrix::identity(3, 3))];
        assert!(GaussianMixture::new(wrong_dim, 0.0).is_err());
        // Singular covariance is fine.
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        GaussianMixture::gaussian(DVector::zeros(2), sing).unwrap();
    }

    #[test]
    fn zero_expansion_loss_is_mean_norm() {
        let p = std_normal_1d();
        let rbf = KernelSpec::rbf(1.0).unwrap();
        let gt = GroundTruth::new(&rbf, &p).unwrap();
        assert_eq!(gt.true_loss(&FunctionExpansion::zero(1)).unwrap(), gt.norm2());
        let q = GaussianMixture::gaussian(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let atom = FunctionExpansion::atom(&[0.0, 0.0], 1.0);
        assert_eq!(true_loss(&atom, &KernelSpec::Linear, &q).unwrap(), 0.0);
    }
}
