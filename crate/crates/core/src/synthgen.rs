//! Random mixtures and samples for the synthetic experiments.
//!
//! All randomness flows through [`ChaCha8Rng`] seeded from a 64-bit value, so a
//! `(config, seed)` pair fixes every output. Per-replicate seeds come from
//! [`derive_seed`], which makes parallel and serial runs draw identical data.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{KmseError, Result};
use crate::kernels::Points;
use crate::moments::{GaussianMixture, MixtureComponent};

pub type KmseRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> KmseRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for item `index` of stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream ^ splitmix64(index)))
}

fn default_components() -> usize {
    4
}
fn default_mean_range() -> (f64, f64) {
    (-10.0, 10.0)
}
fn default_scale() -> f64 {
    2.0
}
fn default_df() -> usize {
    7
}
fn default_noise() -> f64 {
    0.2
}
fn default_pi() -> Vec<f64> {
    vec![0.05, 0.3, 0.4, 0.25]
}

/// Random mixture family: uniform means, Wishart covariances, isotropic noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub d: usize,
    #[serde(default = "default_components")]
    pub n_components: usize,
    #[serde(default = "default_mean_range")]
    pub mean_range: (f64, f64),
    #[serde(default = "default_scale")]
    pub wishart_scale: f64,
    #[serde(default = "default_df")]
    pub wishart_df: usize,
    #[serde(default = "default_noise")]
    pub noise_var: f64,
    #[serde(default = "default_pi")]
    pub pi: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn with_dim(d: usize, seed: u64) -> Self {
        Self {
            d,
            n_components: default_components(),
            mean_range: default_mean_range(),
            wishart_scale: default_scale(),
            wishart_df: default_df(),
            noise_var: default_noise(),
            pi: default_pi(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KmseError::Config(m));
        if self.d == 0 {
            return bad("generator dimension d must be >= 1".into());
        }
        if self.n_components == 0 {
            return bad("n_components must be >= 1".into());
        }
        if self.pi.len() != self.n_components {
            return bad(format!(
                "pi has {} entries but n_components = {}",
                self.pi.len(),
                self.n_components
            ));
        }
        if self.pi.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("pi entries must be nonnegative".into());
        }
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("pi sums to {total}, expected 1"));
        }
        let (lo, hi) = self.mean_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad(format!("mean_range ({lo}, {hi}) must satisfy lo < hi"));
        }
        if !(self.wishart_scale.is_finite() && self.wishart_scale > 0.0) {
            return bad(format!("wishart_scale must be positive, got {}", self.wishart_scale));
        }
        if self.wishart_df == 0 {
            return bad("wishart_df must be >= 1".into());
        }
        if !(self.noise_var.is_finite() && self.noise_var >= 0.0) {
            return bad(format!("noise_var must be nonnegative, got {}", self.noise_var));
        }
        Ok(())
    }
}

/// Draws one mixture. Each covariance is `sum_{j<df} z_j z_j^T` with
/// `z_j ~ N(0, scale I)`; the `d x df` factor is kept for sampling.
pub fn draw_mixture(cfg: &GeneratorConfig) -> Result<GaussianMixture> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let (lo, hi) = cfg.mean_range;
    let sd = cfg.wishart_scale.sqrt();
    let components = cfg
        .pi
        .iter()
        .map(|&pi| {
            let mean = DVector::from_fn(cfg.d, |_, _| rng.random_range(lo..=hi));
            let factor = DMatrix::from_fn(cfg.d, cfg.wishart_df, |_, _| {
                sd * rng.sample::<f64, _>(StandardNormal)
            });
            MixtureComponent::from_factor(pi, mean, factor)
        })
        .collect();
    GaussianMixture::new(components, cfg.noise_var)
}

/// Reusable sampler; factorises each component covariance once.
#[derive(Debug, Clone)]
pub struct MixtureSampler {
    means: Vec<DVector<f64>>,
    factors: Vec<DMatrix<f64>>,
    choose: WeightedIndex<f64>,
    noise_sd: f64,
    dim: usize,
}

impl MixtureSampler {
    pub fn new(p: &GaussianMixture) -> Result<Self> {
        let weights: Vec<f64> = p.components().iter().map(|c| c.weight).collect();
        let choose = WeightedIndex::new(&weights)
            .map_err(|e| KmseError::InvalidArgument(format!("mixture weights: {e}")))?;
        Ok(Self {
            means: p.components().iter().map(|c| c.mean.clone()).collect(),
            factors: p.components().iter().map(|c| c.covariance_factor()).collect(),
            choose,
            noise_sd: p.noise_var().sqrt(),
            dim: p.dim(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `n` rows `x = theta_c + M_c u + sqrt(noise) g`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Points {
        let d = self.dim;
        let mut out = DMatrix::zeros(n, d);
        for i in 0..n {
            let c = self.choose.sample(rng);
            let m = &self.factors[c];
            let u = DVector::from_fn(m.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = &self.means[c] + m * u;
            for j in 0..d {
                let g: f64 = rng.sample(StandardNormal);
                out[(i, j)] = y[j] + self.noise_sd * g;
            }
        }
        out
    }
}

/// `n` i.i.d. draws from `p`, one per row.
pub fn sample(p: &GaussianMixture, n: usize, seed: u64) -> Result<Points> {
    if n == 0 {
        return Err(KmseError::InsufficientSample { required: 1, got: 0 });
    }
    Ok(MixtureSampler::new(p)?.sample(n, &mut rng_from_seed(seed)))
}
