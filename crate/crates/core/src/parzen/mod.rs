//! Parzen window classification with (shrinkage) kernel mean estimates.
//!
//! For classes `a` and `b` with mean estimates `mu_a`, `mu_b`, the binary
//! rule assigns `z` to `a` when
//!
//! ```text
//! mu_a(z) - mu_b(z) + (|mu_b|^2 - |mu_a|^2) / 2 > 0.
//! ```
//!
//! More than two classes are handled by pairwise votes. Every tie, in a
//! pairwise decision or in the vote, goes to the lexicographically smaller
//! class id.

mod data;

use std::path::PathBuf;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use data::{read_csv, read_csv_file, stratified_folds, stratified_split, LabeledDataset, Normalization};

use crate::error::{KmseError, Result};
use crate::estimators::{Estimate, EstimatorSpec};
use crate::expansion::FunctionExpansion;
use crate::kernels::{cross_gram, gram_matrix, KernelSpec, Points};
use crate::synthgen::derive_seed;

const STREAM_SPLIT: u64 = 5;

/// One kernel mean estimate per class.
#[derive(Debug, Clone)]
pub struct ParzenModel {
    spec: KernelSpec,
    classes: Vec<String>,
    means: Vec<FunctionExpansion>,
    norms2: Vec<f64>,
}

impl ParzenModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_mean(&self, class: &str) -> Option<&FunctionExpansion> {
        self.classes.iter().position(|c| c == class).map(|i| &self.means[i])
    }

    pub fn class_norm2(&self, class: &str) -> Option<f64> {
        self.classes.iter().position(|c| c == class).map(|i| self.norms2[i])
    }

    /// `mu_c(z)` for every class, in class order.
    pub fn class_scores(&self, z: &[f64]) -> Result<Vec<f64>> {
        let z = DVector::from_column_slice(z);
        self.means.iter().map(|m| m.evaluate(&self.spec, &z)).collect()
    }

    /// Binary decision value of `a` against `b`; positive favours `a`.
    pub fn decision_value(&self, a: &str, b: &str, z: &[f64]) -> Result<f64> {
        let idx = |c: &str| {
            self.classes
                .iter()
                .position(|x| x == c)
                .ok_or_else(|| KmseError::InvalidArgument(format!("unknown class {c:?}")))
        };
        let (ia, ib) = (idx(a)?, idx(b)?);
        let s = self.class_scores(z)?;
        Ok(self.pair_value(&s, ia, ib))
    }

    fn pair_value(&self, scores: &[f64], a: usize, b: usize) -> f64 {
        scores[a] - scores[b] + 0.5 * (self.norms2[b] - self.norms2[a])
    }

    fn vote(&self, scores: &[f64]) -> usize {
        let c = self.classes.len();
        let mut votes = vec![0usize; c];
        for a in 0..c {
            for b in (a + 1)..c {
                // classes are sorted, so a < b lexicographically and wins ties
                if self.pair_value(scores, a, b) >= 0.0 {
                    votes[a] += 1;
                } else {
                    votes[b] += 1;
                }
            }
        }
        let best = *votes.iter().max().expect("at least two classes");
        votes.iter().position(|&v| v == best).expect("max exists")
    }

    pub fn predict(&self, z: &[f64]) -> Result<&str> {
        let s = self.class_scores(z)?;
        Ok(&self.classes[self.vote(&s)])
    }

    /// Predicted class of every row of `x`.
    pub fn predict_batch(&self, x: &Points) -> Result<Vec<String>> {
        let n = x.nrows();
        let mut scores = vec![vec![0.0; self.classes.len()]; n];
        for (c, m) in self.means.iter().enumerate() {
            if m.is_empty() {
                continue;
            }
            let s = cross_gram(&self.spec, x, m.points())? * m.weights();
            for i in 0..n {
                scores[i][c] = s[i];
            }
        }
        Ok(scores.iter().map(|s| self.classes[self.vote(s)].clone()).collect())
    }

    /// Fraction of rows whose predicted class differs from the label.
    pub fn error_rate(&self, data: &LabeledDataset) -> Result<f64> {
        if data.is_empty() {
            return Err(KmseError::InsufficientSample { required: 1, got: 0 });
        }
        let pred = self.predict_batch(&data.features)?;
        let wrong = pred.iter().zip(&data.labels).filter(|(p, l)| p != l).count();
        Ok(wrong as f64 / data.len() as f64)
    }
}

/// Fits `estimator` to each class separately.
pub fn parzen_train(data: &LabeledDataset, spec: &KernelSpec, estimator: &EstimatorSpec) -> Result<ParzenModel> {
    spec.validate()?;
    let classes = data.classes();
    if classes.len() < 2 {
        return Err(KmseError::InvalidArgument(format!("need at least 2 classes, got {}", classes.len())));
    }
    let need = estimator.min_sample();
    let mut means = Vec::with_capacity(classes.len());
    let mut norms2 = Vec::with_capacity(classes.len());
    for class in &classes {
        let rows: Vec<usize> = (0..data.len()).filter(|&i| &data.labels[i] == class).collect();
        if rows.len() < need {
            return Err(KmseError::InsufficientClass { class: class.clone(), got: rows.len(), required: need });
        }
        let x = data.features.select_rows(&rows);
        let k = gram_matrix(spec, &x)?;
        let fitted = estimator.fit(&k, &x, spec)?;
        let (mean, norm2) = match fitted.estimate {
            Estimate::Weights(w) => {
                let n2 = w.dot(&(k.entries() * &w));
                (FunctionExpansion::new(x, w)?, n2)
            }
            Estimate::Expansion(f) => {
                let n2 = f.norm2(spec)?;
                (f, n2)
            }
        };
        means.push(mean);
        norms2.push(norm2);
    }
    Ok(ParzenModel { spec: *spec, classes, means, norms2 })
}

/// 20 evenly spaced bandwidths on `[0.1, 2]`.
pub fn default_sigma_grid() -> Vec<f64> {
    (0..20).map(|i| 0.1 + 1.9 * i as f64 / 19.0).collect()
}

/// RBF kernel with bandwidth `sigma`.
pub fn rbf_for_sigma(sigma: f64) -> Result<KernelSpec> {
    KernelSpec::rbf(sigma * sigma)
}

/// Bandwidth `sigma` with the smallest mean fold error; ties go to the
/// smaller `sigma`. A single-value grid is returned without evaluation.
pub fn cv_bandwidth(
    data: &LabeledDataset,
    estimator: &EstimatorSpec,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(KmseError::InvalidArgument("empty bandwidth grid".into()));
    }
    if let Some(bad) = grid.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(KmseError::InvalidArgument(format!("bandwidths must be positive, got {bad}")));
    }
    let fold_idx = stratified_folds(&data.labels, folds, seed)?;
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let splits: Vec<(LabeledDataset, LabeledDataset)> = fold_idx
        .iter()
        .filter(|f| !f.is_empty())
        .map(|held| {
            let train: Vec<usize> = (0..data.len()).filter(|i| held.binary_search(i).is_err()).collect();
            (data.subset(&train), data.subset(held))
        })
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for &sigma in grid {
        let spec = rbf_for_sigma(sigma)?;
        let mut total = 0.0;
        for (train, test) in &splits {
            total += parzen_train(train, &spec, estimator)?.error_rate(test)?;
        }
        let err = total / splits.len() as f64;
        log::debug!("sigma = {sigma}: cv error {err}");
        best = match best {
            Some((be, bs)) if be < err || (be == err && bs <= sigma) => Some((be, bs)),
            _ => Some((err, sigma)),
        };
    }
    Ok(best.expect("grid is nonempty").1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// Each estimator cross-validates its own bandwidth.
    PerEstimator,
    /// One bandwidth, cross-validated with the `shared_with` estimator.
    Shared,
    #[default]
    Both,
}

fn default_label() -> String {
    "label".into()
}
fn default_estimators() -> Vec<EstimatorSpec> {
    vec![EstimatorSpec::kme(), EstimatorSpec::b_kmse(), EstimatorSpec::r_kmse(), EstimatorSpec::s_kmse()]
}
fn default_splits() -> usize {
    1
}
fn default_test_fraction() -> f64 {
    0.3
}
fn default_folds() -> usize {
    5
}
fn default_shared_with() -> String {
    "kme".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParzenConfig {
    /// CSV file; relative paths are resolved against the config file.
    pub data: PathBuf,
    #[serde(default = "default_label")]
    pub label_column: String,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default = "default_splits")]
    pub splits: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_sigma_grid")]
    pub sigma_grid: Vec<f64>,
    #[serde(default)]
    pub sigma_mode: SigmaMode,
    #[serde(default = "default_shared_with")]
    pub shared_with: String,
    #[serde(default)]
    pub master_seed: u64,
}

impl ParzenConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| KmseError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KmseError::Config(m));
        if self.estimators.is_empty() {
            return bad("no estimators configured".into());
        }
        let mut ids: Vec<String> = self.estimators.iter().map(|e| e.id()).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate estimator id {:?}", w[0]));
        }
        if self.splits == 0 {
            return bad("splits must be >= 1".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if self.folds < 2 {
            return bad(format!("folds must be >= 2, got {}", self.folds));
        }
        if self.sigma_grid.is_empty() || self.sigma_grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("sigma_grid must be nonempty and positive".into());
        }
        if self.sigma_mode != SigmaMode::PerEstimator && !self.estimators.iter().any(|e| e.id() == self.shared_with) {
            return bad(format!("shared_with {:?} is not among the estimators", self.shared_with));
        }
        Ok(())
    }
}

/// One estimator on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct ParzenRow {
    pub estimator: String,
    pub error_rate: f64,
    pub n_test: usize,
    pub seed: u64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParzenReport {
    pub per_estimator: Option<Vec<ParzenRow>>,
    pub shared: Option<Vec<ParzenRow>>,
}

/// Repeated stratified train/test evaluation. Split `s` uses seed
/// `derive_seed(master_seed, SPLIT, s)` for both the split and the CV folds,
/// and every estimator sees the same split. Features are standardised with
/// training statistics only.
pub fn run_parzen(cfg: &ParzenConfig, data: &LabeledDataset) -> Result<ParzenReport> {
    cfg.validate()?;
    for e in &cfg.estimators {
        e.validate(data.features.ncols())?;
    }
    let want_per = cfg.sigma_mode != SigmaMode::Shared;
    let want_shared = cfg.sigma_mode != SigmaMode::PerEstimator;
    let shared_est = cfg.estimators.iter().find(|e| e.id() == cfg.shared_with);

    let per_split: Vec<(Vec<ParzenRow>, Vec<ParzenRow>)> = (0..cfg.splits)
        .into_par_iter()
        .map(|s| -> Result<_> {
            let seed = derive_seed(cfg.master_seed, STREAM_SPLIT, s as u64);
            let (train_idx, test_idx) = stratified_split(&data.labels, cfg.test_fraction, seed)?;
            if test_idx.is_empty() {
                return Err(KmseError::Data("test split is empty".into()));
            }
            let raw_train = data.subset(&train_idx);
            let norm = Normalization::fit(&raw_train.features)?;
            let train = norm.apply_dataset(&raw_train);
            let test = norm.apply_dataset(&data.subset(&test_idx));
            let eval = |e: &EstimatorSpec, sigma: f64| -> Result<ParzenRow> {
                let model = parzen_train(&train, &rbf_for_sigma(sigma)?, e)?;
                Ok(ParzenRow { estimator: e.id(), error_rate: model.error_rate(&test)?, n_test: test.len(), seed, sigma })
            };
            let mut per = Vec::new();
            if want_per {
                for e in &cfg.estimators {
                    let sigma = cv_bandwidth(&train, e, &cfg.sigma_grid, cfg.folds, seed)?;
                    per.push(eval(e, sigma)?);
                }
            }
            let mut shared = Vec::new();
            if let (true, Some(se)) = (want_shared, shared_est) {
                let sigma = match per.iter().find(|r| r.estimator == cfg.shared_with) {
                    Some(r) => r.sigma,
                    None => cv_bandwidth(&train, se, &cfg.sigma_grid, cfg.folds, seed)?,
                };
                for e in &cfg.estimators {
                    shared.push(eval(e, sigma)?);
                }
            }
            Ok((per, shared))
        })
        .collect::<Result<Vec<_>>>()?;

    let (per, shared): (Vec<_>, Vec<_>) = per_split.into_iter().unzip();
    Ok(ParzenReport {
        per_estimator: want_per.then(|| per.into_iter().flatten().collect()),
        shared: want_shared.then(|| shared.into_iter().flatten().collect()),
    })
}

/// Mean error rate and its standard error over splits, per estimator.
pub fn error_summary(rows: &[ParzenRow]) -> Vec<(String, f64, Option<f64>)> {
    let mut ids: Vec<String> = Vec::new();
    for r in rows {
        if !ids.contains(&r.estimator) {
            ids.push(r.estimator.clone());
        }
    }
    ids.into_iter()
        .map(|id| {
            let v: Vec<f64> = rows.iter().filter(|r| r.estimator == id).map(|r| r.error_rate).collect();
            let k = v.len() as f64;
            let mean = v.iter().sum::<f64>() / k;
            let se = (v.len() > 1).then(|| {
                (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0) / k).sqrt()
            });
            (id, mean, se)
        })
        .collect()
}

pub fn write_rows<W: std::io::Write>(w: W, rows: &[ParzenRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| KmseError::Io(e.to_string());
    out.write_record(["estimator", "error_rate", "n_test", "seed"]).map_err(io)?;
    for r in rows {
        out.write_record([r.estimator.clone(), format!("{:?}", r.error_rate), r.n_test.to_string(), r.seed.to_string()])
            .map_err(io)?;
    }
    out.flush().map_err(|e| KmseError::Io(e.to_string()))
}

/// Bandwidths chosen in each mode, as `mode,estimator,seed,sigma`.
pub fn write_sigmas<W: std::io::Write>(w: W, report: &ParzenReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| KmseError::Io(e.to_string());
    out.write_record(["mode", "estimator", "seed", "sigma"]).map_err(io)?;
    for (mode, rows) in [("per-estimator", &report.per_estimator), ("shared", &report.shared)] {
        for r in rows.iter().flatten() {
            out.write_record([mode.to_string(), r.estimator.clone(), r.seed.to_string(), format!("{:?}", r.sigma)])
                .map_err(io)?;
        }
    }
    out.flush().map_err(|e| KmseError::Io(e.to_string()))
}
