//! Kernel mean shrinkage estimators.
//!
//! The empirical kernel mean `(1/n) sum_i k(x_i, .)` is admissible only in
//! the sense of unbiasedness; shrinking it toward a fixed target lowers its
//! RKHS risk. This crate provides the estimators (B-KMSE, R-KMSE, S-KMSE and
//! a generic shrinker), exact ground truth for Gaussian mixtures, a Monte
//! Carlo harness, and a Parzen window classifier built on top.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod expansion;
pub mod harness;
pub mod kernels;
pub mod moments;
pub mod parzen;
pub mod synthgen;

pub use error::{KmseError, Result};
pub use estimators::{EstimatorSpec, GramStats, ShrinkageSelection};
pub use expansion::{expansion_distance2, FunctionExpansion};
pub use kernels::{gram_matrix, median_heuristic, GramMatrix, KernelSpec, Points};
pub use moments::{GaussianMixture, GroundTruth, MixtureComponent};
pub use synthgen::{derive_seed, draw_mixture, sample, GeneratorConfig};
