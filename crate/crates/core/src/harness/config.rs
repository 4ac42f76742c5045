//! Experiment configuration, read from TOML.
//!
//! ```toml
//! kernel = "rbf-median"        # or "linear", "poly2", "poly3", { family = "rbf", sigma2 = 1.0 }
//! n = 10
//! m = 1000
//! d = 30
//! master_seed = 1
//! baseline = "kme"
//!
//! [generator]                  # or an explicit [mixture]
//! noise_var = 0.2
//!
//! [[estimators]]
//! kind = "kme"
//! [[estimators]]
//! kind = "s-kmse"
//! lambda = { mode = "gamma0", factor = 1.0 }
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KmseError, Result};
use crate::estimators::EstimatorSpec;
use crate::kernels::{median_heuristic, KernelSpec, Points};
use crate::moments::{GaussianMixture, MixtureComponent};
use crate::synthgen::{derive_seed, draw_mixture, GeneratorConfig};

pub(crate) const STREAM_SAMPLE: u64 = 1;
pub(crate) const STREAM_MIXTURE: u64 = 2;
pub(crate) const STREAM_LOOCV: u64 = 3;
pub(crate) const STREAM_GRID: u64 = 4;

/// A fixed kernel, or an RBF kernel whose bandwidth is the median heuristic
/// of each sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(try_from = "KernelChoiceRaw", into = "KernelChoiceRaw")]
pub enum KernelChoice {
    Fixed(KernelSpec),
    #[default]
    MedianRbf,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KernelChoiceRaw {
    Name(String),
    Spec(KernelSpec),
}

impl TryFrom<KernelChoiceRaw> for KernelChoice {
    type Error = String;

    fn try_from(raw: KernelChoiceRaw) -> std::result::Result<Self, String> {
        match raw {
            KernelChoiceRaw::Spec(s) => {
                s.validate().map_err(|e| e.to_string())?;
                Ok(KernelChoice::Fixed(s))
            }
            KernelChoiceRaw::Name(name) => match name.as_str() {
                "linear" => Ok(KernelChoice::Fixed(KernelSpec::Linear)),
                "poly2" => Ok(KernelChoice::Fixed(KernelSpec::Poly2)),
                "poly3" => Ok(KernelChoice::Fixed(KernelSpec::Poly3)),
                "rbf-median" | "median-rbf" => Ok(KernelChoice::MedianRbf),
                other => Err(format!(
                    "unknown kernel {other:?}; expected linear, poly2, poly3, rbf-median or {{ family = \"rbf\", sigma2 = ... }}"
                )),
            },
        }
    }
}

impl From<KernelChoice> for KernelChoiceRaw {
    fn from(k: KernelChoice) -> Self {
        match k {
            KernelChoice::MedianRbf => KernelChoiceRaw::Name("rbf-median".into()),
            KernelChoice::Fixed(s @ KernelSpec::Rbf { .. }) => KernelChoiceRaw::Spec(s),
            KernelChoice::Fixed(s) => KernelChoiceRaw::Name(s.name().into()),
        }
    }
}

impl KernelChoice {
    /// The kernel used for sample `x`.
    pub fn resolve(&self, x: &Points) -> Result<KernelSpec> {
        match self {
            KernelChoice::Fixed(s) => Ok(*s),
            KernelChoice::MedianRbf => KernelSpec::rbf(median_heuristic(x)?),
        }
    }

    pub fn label(&self) -> String {
        match self {
            KernelChoice::Fixed(s) => s.to_string(),
            KernelChoice::MedianRbf => "rbf-median".into(),
        }
    }
}

/// Generator settings, all defaulted when the section is absent; the dimension comes from the top-level `d` and the
/// seed, unless given, from `master_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub n_components: Option<usize>,
    pub mean_range: Option<(f64, f64)>,
    pub wishart_scale: Option<f64>,
    pub wishart_df: Option<usize>,
    pub noise_var: Option<f64>,
    pub pi: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl GeneratorSection {
    /// Generator for distribution number `index` in dimension `d`.
    pub fn config(&self, d: usize, master_seed: u64, index: u64) -> GeneratorConfig {
        let base = self.seed.unwrap_or(master_seed);
        let mut g = GeneratorConfig::with_dim(d, derive_seed(base, STREAM_MIXTURE, index));
        if let Some(v) = self.n_components {
            g.n_components = v;
        }
        if let Some(v) = self.mean_range {
            g.mean_range = v;
        }
        if let Some(v) = self.wishart_scale {
            g.wishart_scale = v;
        }
        if let Some(v) = self.wishart_df {
            g.wishart_df = v;
        }
        if let Some(v) = self.noise_var {
            g.noise_var = v;
        }
        if let Some(v) = &self.pi {
            g.pi = v.clone();
        } else if g.n_components != g.pi.len() {
            g.pi = vec![1.0 / g.n_components as f64; g.n_components];
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major covariance.
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    #[serde(default)]
    pub noise_var: f64,
    pub components: Vec<ComponentConfig>,
}

impl MixtureConfig {
    pub fn to_mixture(&self) -> Result<GaussianMixture> {
        let mut comps = Vec::with_capacity(self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            let d = c.mean.len();
            if c.cov.len() != d || c.cov.iter().any(|r| r.len() != d) {
                return Err(KmseError::Config(format!(
                    "mixture.components[{i}]: cov must be {d}x{d}"
                )));
            }
            let cov = DMatrix::from_fn(d, d, |r, s| c.cov[r][s]);
            comps.push(MixtureComponent::new(c.weight, DVector::from_vec(c.mean.clone()), cov));
        }
        GaussianMixture::new(comps, self.noise_var).map_err(|e| KmseError::Config(format!("mixture: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Alpha,
    Lambda,
    N,
    D,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::Lambda => "lambda",
            SweepAxis::N => "n",
            SweepAxis::D => "d",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn default_fractions() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffSection {
    /// Values handed to every `shrink` estimator's alpha rule.
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
}

impl Default for TradeoffSection {
    fn default() -> Self {
        Self { fractions: default_fractions() }
    }
}

fn default_distributions() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    /// Defaults to the top-level kernel.
    #[serde(default)]
    pub kernels: Option<Vec<KernelChoice>>,
    #[serde(default = "default_distributions")]
    pub distributions: usize,
}

fn default_instances() -> usize {
    50
}
fn default_n_min() -> usize {
    3
}
fn default_n_max() -> usize {
    20
}
fn default_lambda_range() -> (f64, f64) {
    (1e-3, 10.0)
}
fn default_check_dim() -> usize {
    2
}
fn default_check_kernels() -> Vec<KernelChoice> {
    vec![
        KernelChoice::Fixed(KernelSpec::Linear),
        KernelChoice::Fixed(KernelSpec::Poly2),
        KernelChoice::Fixed(KernelSpec::Poly3),
        KernelChoice::Fixed(KernelSpec::Rbf { sigma2: 1.0 }),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoocvCheckSection {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_check_dim")]
    pub d: usize,
    #[serde(default = "default_check_kernels")]
    pub kernels: Vec<KernelChoice>,
    /// `lambda` is drawn log-uniformly from this range.
    #[serde(default = "default_lambda_range")]
    pub lambda_range: (f64, f64),
    /// Largest relative difference accepted as agreement.
    #[serde(default = "default_check_tolerance")]
    pub tolerance: f64,
}

fn default_check_tolerance() -> f64 {
    1e-8
}

impl Default for LoocvCheckSection {
    fn default() -> Self {
        Self {
            instances: default_instances(),
            n_min: default_n_min(),
            n_max: default_n_max(),
            d: default_check_dim(),
            kernels: default_check_kernels(),
            lambda_range: default_lambda_range(),
            tolerance: default_check_tolerance(),
        }
    }
}

fn default_baseline() -> String {
    "kme".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kernel: KernelChoice,
    #[serde(default)]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub generator: Option<GeneratorSection>,
    #[serde(default)]
    pub mixture: Option<MixtureConfig>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_baseline")]
    pub baseline: String,
    /// Fill the `runtime_ms` column. Off by default so repeated runs produce
    /// identical bytes.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub tradeoff: Option<TradeoffSection>,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub loocv_check: Option<LoocvCheckSection>,
}

/// Everything needed for one `estimate_risk` run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kernel: KernelChoice,
    pub mixture: GaussianMixture,
    pub estimators: Vec<EstimatorSpec>,
    pub n: usize,
    pub m: usize,
    pub master_seed: u64,
    pub baseline: String,
    pub record_timing: bool,
}

impl Scenario {
    pub fn new(
        kernel: KernelChoice,
        mixture: GaussianMixture,
        estimators: Vec<EstimatorSpec>,
        n: usize,
        m: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            kernel,
            mixture,
            estimators,
            n,
            m,
            master_seed,
            baseline: default_baseline(),
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(KmseError::Config("m must be >= 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(KmseError::Config("no estimators configured".into()));
        }
        let mut ids: Vec<String> = self.estimators.iter().map(|e| e.id()).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(KmseError::Config(format!(
                "duplicate estimator id {:?}; set `id` to tell them apart",
                w[0]
            )));
        }
        for e in &self.estimators {
            e.validate(self.mixture.dim())?;
            if self.n < e.min_sample() {
                return Err(KmseError::Config(format!(
                    "estimator {:?} needs n >= {}, got n = {}",
                    e.id(),
                    e.min_sample(),
                    self.n
                )));
            }
        }
        if matches!(self.kernel, KernelChoice::MedianRbf) && self.n < 2 {
            return Err(KmseError::Config("the median heuristic needs n >= 2".into()));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| KmseError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| KmseError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&src)
    }

    pub fn require_n(&self) -> Result<usize> {
        self.n.ok_or_else(|| KmseError::Config("missing key `n`".into()))
    }

    pub fn require_m(&self) -> Result<usize> {
        self.m.ok_or_else(|| KmseError::Config("missing key `m`".into()))
    }

    pub fn has_baseline(&self) -> bool {
        self.estimators.iter().any(|e| e.id() == self.baseline)
    }

    /// Ground-truth distribution number `index` in dimension `d` (or the
    /// configured `d` / explicit mixture).
    pub fn mixture(&self, d: Option<usize>, index: u64) -> Result<GaussianMixture> {
        match (&self.generator, &self.mixture) {
            (Some(_), Some(_)) => Err(KmseError::Config(
                "give either [generator] or [mixture], not both".into(),
            )),
            (None, Some(m)) => {
                let p = m.to_mixture()?;
                match d.or(self.d) {
                    Some(d) if d != p.dim() => Err(KmseError::Config(format!(
                        "d = {d} but the mixture has dimension {}",
                        p.dim()
                    ))),
                    _ => Ok(p),
                }
            }
            (g, None) => {
                let default = GeneratorSection::default();
                let g = g.as_ref().unwrap_or(&default);
                let d = d
                    .or(self.d)
                    .ok_or_else(|| KmseError::Config("random mixtures need the top-level `d`".into()))?;
                let cfg = g.config(d, self.master_seed, index);
                cfg.validate()
                    .map_err(|e| KmseError::Config(format!("generator: {e}")))?;
                draw_mixture(&cfg)
            }
        }
    }

    /// The scenario described by the top-level keys.
    pub fn scenario(&self) -> Result<Scenario> {
        let n = self.require_n()?;
        let m = self.require_m()?;
        let mixture = self.mixture(None, 0)?;
        let sc = Scenario {
            kernel: self.kernel,
            mixture,
            estimators: self.estimators.clone(),
            n,
            m,
            master_seed: self.master_seed,
            baseline: self.baseline.clone(),
            record_timing: self.record_timing,
        };
        sc.validate()?;
        if !self.has_baseline() {
            return Err(KmseError::Config(format!(
                "baseline {:?} is not among the estimators",
                self.baseline
            )));
        }
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        kernel = { family = "rbf", sigma2 = 1.0 }
        n = 10
        m = 5
        master_seed = 3

        [mixture]
        [[mixture.components]]
        weight = 1.0
        mean = [0.0]
        cov = [[1.0]]

        [[estimators]]
        kind = "kme"
        [[estimators]]
        kind = "b-kmse"
    "#;

    #[test]
    fn parses_and_builds_scenario() {
        let cfg = ExperimentConfig::from_toml_str(BASIC).unwrap();
        assert_eq!(cfg.kernel, KernelChoice::Fixed(KernelSpec::Rbf { sigma2: 1.0 }));
        let sc = cfg.scenario().unwrap();
        assert_eq!((sc.n, sc.m, sc.master_seed), (10, 5, 3));
        assert_eq!(sc.mixture.dim(), 1);
    }

    #[test]
    fn kernel_names() {
        for (src, want) in [
            ("\"linear\"", KernelChoice::Fixed(KernelSpec::Linear)),
            ("\"poly3\"", KernelChoice::Fixed(KernelSpec::Poly3)),
            ("\"rbf-median\"", KernelChoice::MedianRbf),
        ] {
            let cfg = ExperimentConfig::from_toml_str(&format!("kernel = {src}")).unwrap();
            assert_eq!(cfg.kernel, want);
        }
        assert!(ExperimentConfig::from_toml_str("kernel = \"cubic\"").is_err());
        assert!(ExperimentConfig::from_toml_str("kernel = { family = \"rbf\", sigma2 = -1.0 }").is_err());
    }

    #[test]
    fn unknown_keys_rejected_with_position() {
        let err = ExperimentConfig::from_toml_str("n = 3\nreplicates = 4\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("replicates"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
        let nested = BASIC.replace("mean = [0.0]", "mean = [0.0]\nsd = 1.0");
        assert!(ExperimentConfig::from_toml_str(&nested).is_err());
    }

    #[test]
    fn scenario_validation() {
        let no_base = BASIC.replace("kind = \"kme\"", "kind = \"r-kmse\"");
        assert!(ExperimentConfig::from_toml_str(&no_base).unwrap().scenario().is_err());
        let dup = format!("{BASIC}\n[[estimators]]\nkind = \"kme\"\n");
        assert!(ExperimentConfig::from_toml_str(&dup).unwrap().scenario().is_err());
        let small = BASIC.replace("n = 10", "n = 1");
        assert!(ExperimentConfig::from_toml_str(&small).unwrap().scenario().is_err());
        let zero_m = BASIC.replace("m = 5", "m = 0");
        assert!(ExperimentConfig::from_toml_str(&zero_m).unwrap().scenario().is_err());
    }

    #[test]
    fn generator_needs_dimension() {
        let src = "n = 10\nm = 2\n[generator]\n[[estimators]]\nkind = \"kme\"\n";
        let cfg = ExperimentConfig::from_toml_str(src).unwrap();
        assert!(cfg.scenario().is_err());
        let cfg = ExperimentConfig::from_toml_str(&format!("d = 3\n{src}")).unwrap();
        let sc = cfg.scenario().unwrap();
        assert_eq!(sc.mixture.dim(), 3);
        assert_eq!(sc.mixture.components().len(), 4);
        // Same master seed, same mixture.
        assert_eq!(cfg.scenario().unwrap().mixture, sc.mixture);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml_str(BASIC).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
