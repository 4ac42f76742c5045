//! Kernel evaluation and Gram matrices.
//!
//! The four kernels used throughout are the linear kernel, the inhomogeneous
//! polynomial kernels of degree 2 and 3 (offset fixed at 1) and the Gaussian
//! RBF kernel `exp(-|x - y|^2 / (2 sigma^2))`. Sample sets are stored as
//! `n x d` matrices with one point per row.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{KmseError, Result};

/// Point sets: one sample per row.
pub type Points = DMatrix<f64>;

/// Relative tolerance for the PSD check on Gram matrices.
pub const PSD_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Linear,
    Poly2,
    Poly3,
    Rbf { sigma2: f64 },
}

impl KernelSpec {
    pub fn rbf(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(KmseError::InvalidArgument(format!(
                "RBF bandwidth sigma^2 must be positive, got {sigma2}"
            )));
        }
        Ok(KernelSpec::Rbf { sigma2 })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { sigma2 } => KernelSpec::rbf(sigma2).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Short lower-case name, as used in config files and CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Poly2 => "poly2",
            KernelSpec::Poly3 => "poly3",
            KernelSpec::Rbf { .. } => "rbf",
        }
    }

    /// `k(x, y)` for two points of equal dimension.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(KmseError::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.is_empty() {
            return Err(KmseError::InvalidArgument(
                "kernel arguments must have dimension >= 1".into(),
            ));
        }
        Ok(match *self {
            KernelSpec::Rbf { sigma2 } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma2)).exp()
            }
            _ => self.of_dot(x.iter().zip(y).map(|(a, b)| a * b).sum()),
        })
    }

    #[inline]
    fn of_dot(&self, dot: f64) -> f64 {
        match self {
            KernelSpec::Linear => dot,
            KernelSpec::Poly2 => (dot + 1.0).powi(2),
            KernelSpec::Poly3 => (dot + 1.0).powi(3),
            KernelSpec::Rbf { .. } => unreachable!("RBF is not a dot-product kernel"),
        }
    }

    /// Kernel between row `i` of `a` and row `j` of `b`; dimensions are checked by callers.
    #[inline]
    pub(crate) fn eval_rows(&self, a: &Points, i: usize, b: &Points, j: usize) -> f64 {
        let d = a.ncols();
        match *self {
            KernelSpec::Rbf { sigma2 } => {
                let mut d2 = 0.0;
                for c in 0..d {
                    let t = a[(i, c)] - b[(j, c)];
                    d2 += t * t;
                }
                (-d2 / (2.0 * sigma2)).exp()
            }
            _ => {
                let mut dot = 0.0;
                for c in 0..d {
                    dot += a[(i, c)] * b[(j, c)];
                }
                self.of_dot(dot)
            }
        }
    }

    /// `k(x_i, y)` for every row of `x`.
    pub fn eval_against(&self, x: &Points, y: &DVector<f64>) -> Result<DVector<f64>> {
        if x.ncols() != y.len() {
            return Err(KmseError::DimensionMismatch {
                expected: x.ncols(),
                got: y.len(),
            });
        }
        let yrow = y.transpose();
        let ym = DMatrix::from_row_slice(1, y.len(), yrow.as_slice());
        Ok(DVector::from_fn(x.nrows(), |i, _| self.eval_rows(x, i, &ym, 0)))
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Rbf { sigma2 } => write!(f, "rbf(sigma2={sigma2})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Convenience wrapper over [`KernelSpec::eval`].
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.eval(x, y)
}

/// Symmetric kernel matrix over a sample, with a lazily computed eigensystem.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    eigen: OnceLock<SymmetricEigen<f64, Dyn>>,
}

impl GramMatrix {
    /// Wraps an existing matrix. The matrix must be square and symmetric; PSD
    /// is checked separately by [`GramMatrix::check_psd`] because it costs an
    /// eigendecomposition.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(KmseError::InvalidArgument(format!(
                "Gram matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() == 0 {
            return Err(KmseError::InsufficientSample {
                required: 1,
                got: 0,
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(KmseError::InvalidArgument(
                "Gram matrix has non-finite entries".into(),
            ));
        }
        let n = entries.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(KmseError::InvalidArgument(format!(
                        "Gram matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self {
            entries,
            eigen: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn eigen(&self) -> &SymmetricEigen<f64, Dyn> {
        self.eigen
            .get_or_init(|| SymmetricEigen::new(self.entries.clone()))
    }

    /// Smallest eigenvalue at or above `-PSD_TOLERANCE * largest`.
    pub fn check_psd(&self) -> Result<()> {
        let ev = &self.eigen().eigenvalues;
        let max = ev.max();
        let min = ev.min();
        if min < -PSD_TOLERANCE * max.abs().max(f64::MIN_POSITIVE) {
            return Err(KmseError::InvalidArgument(format!(
                "Gram matrix is not PSD: smallest eigenvalue {min}, largest {max}"
            )));
        }
        Ok(())
    }

    /// Smallest eigenvalue that is nonzero relative to the largest one
    /// (above `1e-10 * largest`). Used to scale shrinkage grids.
    pub fn smallest_nonzero_eigenvalue(&self) -> Option<f64> {
        let ev = &self.eigen().eigenvalues;
        let max = ev.max();
        if max <= 0.0 {
            return None;
        }
        ev.iter()
            .copied()
            .filter(|&v| v > 1e-10 * max)
            .min_by(f64::total_cmp)
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn sum(&self) -> f64 {
        self.entries.sum()
    }
}

/// `K_ij = k(x_i, x_j)`, computed on the upper triangle and mirrored.
pub fn gram_matrix(spec: &KernelSpec, x: &Points) -> Result<GramMatrix> {
    spec.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(KmseError::InsufficientSample {
            required: 1,
            got: 0,
        });
    }
    if x.ncols() == 0 {
        return Err(KmseError::InvalidArgument(
            "points must have dimension >= 1".into(),
        ));
    }
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = spec.eval_rows(x, i, x, j);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    GramMatrix::from_matrix(k)
}

/// `n x m` matrix of `k(x_i, y_j)`.
pub fn cross_gram(spec: &KernelSpec, x: &Points, y: &Points) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if x.ncols() != y.ncols() && x.nrows() > 0 && y.nrows() > 0 {
        return Err(KmseError::DimensionMismatch {
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    Ok(DMatrix::from_fn(x.nrows(), y.nrows(), |i, j| {
        spec.eval_rows(x, i, y, j)
    }))
}

/// Median of the squared pairwise distances over pairs `i < j`.
///
/// The diagonal is excluded. An even number of pairs averages the two middle
/// values.
pub fn median_heuristic(x: &Points) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(KmseError::InsufficientSample { required: 2, got: n });
    }
    let mut d2 = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for c in 0..x.ncols() {
                let t = x[(i, c)] - x[(j, c)];
                s += t * t;
            }
            d2.push(s);
        }
    }
    if d2.iter().all(|&v| v == 0.0) {
        return Err(KmseError::DegenerateBandwidth);
    }
    d2.sort_unstable_by(f64::total_cmp);
    let m = d2.len();
    let med = if m % 2 == 1 {
        d2[m / 2]
    } else {
        0.5 * (d2[m / 2 - 1] + d2[m / 2])
    };
    if med > 0.0 {
        Ok(med)
    } else {
        // More than half the pairs coincide; the median itself is zero.
        Err(KmseError::DegenerateBandwidth)
    }
}

/// `H K H` with `H = I - (1/n) 1 1^T`.
pub fn center_gram(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let nf = n as f64;
    let row_means = DVector::from_fn(n, |i, _| k.row(i).sum() / nf);
    let col_means = DVector::from_fn(n, |j, _| k.column(j).sum() / nf);
    let grand = k.sum() / (nf * nf);
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Gram matrix of the centered product kernel `k~_X(x,x') k~_Y(y,y')` on
/// paired samples: `(H K_X H) o (H K_Y H)`.
///
/// Any estimator applied to this Gram matrix estimates the cross-covariance
/// operator as an element of the product RKHS.
pub fn centered_product_gram(kx: &GramMatrix, ky: &GramMatrix) -> Result<GramMatrix> {
    if kx.n() != ky.n() {
        return Err(KmseError::DimensionMismatch {
            expected: kx.n(),
            got: ky.n(),
        });
    }
    if kx.n() < 2 {
        return Err(KmseError::InsufficientSample {
            required: 2,
            got: kx.n(),
        });
    }
    let cx = center_gram(kx.entries());
    let cy = center_gram(ky.entries());
    let mut out = cx.component_mul(&cy);
    // Rounding in the centering can break exact symmetry; restore it.
    let n = out.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    GramMatrix::from_matrix(out)
}
