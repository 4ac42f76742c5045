use nalgebra::{DMatrix, DVector};

use crate::error::{KmseError, Result};
use crate::kernels::{cross_gram, KernelSpec, Points};

/// A finite RKHS element `sum_j w_j k(u_j, .)`.
///
/// Every kernel mean estimate in this crate is represented this way; an
/// expansion with no atoms is the zero function.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionExpansion {
    points: Points,
    weights: DVector<f64>,
}

impl FunctionExpansion {
    pub fn new(points: Points, weights: DVector<f64>) -> Result<Self> {
        if points.nrows() != weights.len() {
            return Err(KmseError::DimensionMismatch {
                expected: points.nrows(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(KmseError::InvalidArgument(
                "expansion weights must be finite".into(),
            ));
        }
        Ok(Self { points, weights })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            points: DMatrix::zeros(0, dim),
            weights: DVector::zeros(0),
        }
    }

    /// `scale * k(point, .)`.
    pub fn atom(point: &[f64], scale: f64) -> Self {
        Self {
            points: DMatrix::from_row_slice(1, point.len(), point),
            weights: DVector::from_element(1, scale),
        }
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self.points.clone(),
            weights: &self.weights * factor,
        }
    }

    /// Atoms of `self` followed by atoms of `other`. Duplicate points are kept.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        if self.dim() != other.dim() {
            return Err(KmseError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let (m1, m2, d) = (self.len(), other.len(), self.dim());
        let points = DMatrix::from_fn(m1 + m2, d, |i, c| {
            if i < m1 {
                self.points[(i, c)]
            } else {
                other.points[(i - m1, c)]
            }
        });
        let weights = DVector::from_fn(m1 + m2, |i, _| {
            if i < m1 {
                self.weights[i]
            } else {
                other.weights[i - m1]
            }
        });
        Ok(Self { points, weights })
    }

    /// `f(z) = sum_j w_j k(u_j, z)`.
    pub fn evaluate(&self, spec: &KernelSpec, z: &DVector<f64>) -> Result<f64> {
        if self.is_empty() {
            return Ok(0.0);
        }
        Ok(spec.eval_against(&self.points, z)?.dot(&self.weights))
    }

    /// `<self, other>_H`.
    pub fn inner(&self, other: &Self, spec: &KernelSpec) -> Result<f64> {
        if self.is_empty() || other.is_empty() {
            return Ok(0.0);
        }
        let k = cross_gram(spec, &self.points, &other.points)?;
        Ok(self.weights.dot(&(k * &other.weights)))
    }

    pub fn norm2(&self, spec: &KernelSpec) -> Result<f64> {
        self.inner(self, spec)
    }
}

/// `|a - b|_H^2`, with rounding noise above `-1e-10` clamped to zero.
pub fn expansion_distance2(
    a: &FunctionExpansion,
    b: &FunctionExpansion,
    spec: &KernelSpec,
) -> Result<f64> {
    if !a.is_empty() && !b.is_empty() && a.dim() != b.dim() {
        return Err(KmseError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let v = a.norm2(spec)? - 2.0 * a.inner(b, spec)? + b.norm2(spec)?;
    Ok(clamp_squared_norm(v))
}

pub(crate) fn clamp_squared_norm(v: f64) -> f64 {
    if v < 0.0 && v > -1e-10 {
        0.0
    } else {
        v
    }
}
