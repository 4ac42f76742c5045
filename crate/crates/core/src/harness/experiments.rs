use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{ExperimentConfig, LoocvCheckSection, Scenario, SweepAxis, STREAM_GRID, STREAM_LOOCV};
use super::risk::{estimate_risk, RiskReport};
use crate::error::{KmseError, Result};
use crate::estimators::{s_kmse_loocv_score, s_kmse_loocv_score_naive, EstimatorSpec};
use crate::kernels::gram_matrix;
use crate::synthgen::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub points: Vec<(f64, RiskReport)>,
}

fn as_count(axis: SweepAxis, v: f64) -> Result<usize> {
    if v.fract() != 0.0 || v < 1.0 || !v.is_finite() {
        return Err(KmseError::Config(format!("{} sweep values must be positive integers, got {v}", axis.name())));
    }
    Ok(v as usize)
}

/// Scenario of `cfg` with one axis overridden.
pub fn scenario_at(cfg: &ExperimentConfig, axis: SweepAxis, v: f64) -> Result<Scenario> {
    let mut base = cfg.clone();
    match axis {
        SweepAxis::N => base.n = Some(as_count(axis, v)?),
        SweepAxis::D => {
            if cfg.mixture.is_some() {
                return Err(KmseError::Config("a d sweep needs random mixtures, not a fixed [mixture]".into()));
            }
            base.d = Some(as_count(axis, v)?);
        }
        SweepAxis::Alpha | SweepAxis::Lambda => {
            let mut touched = false;
            base.estimators = cfg
                .estimators
                .iter()
                .map(|e| {
                    let swapped = if axis == SweepAxis::Alpha { e.with_alpha_param(v) } else { e.with_lambda_param(v) };
                    touched |= swapped.is_some();
                    swapped.unwrap_or_else(|| e.clone())
                })
                .collect();
            if !touched {
                return Err(KmseError::Config(format!(
                    "no estimator has a {} parameter to sweep",
                    axis.name()
                )));
            }
        }
    }
    base.scenario()
}

/// One risk estimate per axis value, all under the same master seed so that
/// replicate `r` draws the same data whenever `n` and `d` agree.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(KmseError::Config("sweep has no values".into()));
    }
    // Validate every cell before running any.
    let scenarios = values
        .iter()
        .map(|&v| scenario_at(cfg, axis, v))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::with_capacity(values.len());
    for (&v, sc) in values.iter().zip(&scenarios) {
        log::info!("{} = {v}", axis.name());
        points.push((v, estimate_risk(sc)?));
    }
    Ok(SweepReport { axis, points })
}

/// Alpha sweep over the `[tradeoff]` fractions (or 0, 0.1, ..., 1).
pub fn tradeoff(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let fractions = cfg.tradeoff.clone().unwrap_or_default().fractions;
    if !cfg.estimators.iter().any(|e| matches!(e, EstimatorSpec::Shrink { .. })) {
        return Err(KmseError::Config("tradeoff needs at least one `shrink` estimator".into()));
    }
    sweep(cfg, SweepAxis::Alpha, &fractions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub kernel: String,
    pub n: usize,
    pub d: usize,
    pub distribution: usize,
    pub estimator: String,
    pub mean_loss: Option<f64>,
    pub pct_improve: Option<f64>,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub kernel: String,
    pub n: usize,
    pub d: usize,
    pub estimator: String,
    pub median_pct_improve: Option<f64>,
    pub n_distributions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub cells: Vec<GridCell>,
    pub summaries: Vec<GridSummary>,
}

impl GridReport {
    pub fn median(&self, kernel: &str, n: usize, d: usize, estimator: &str) -> Option<f64> {
        self.summaries
            .iter()
            .find(|s| s.kernel == kernel && s.n == n && s.d == d && s.estimator == estimator)
            .and_then(|s| s.median_pct_improve)
    }
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 { values[k / 2] } else { 0.5 * (values[k / 2 - 1] + values[k / 2]) })
}

/// Percentage improvement over the baseline across `(kernel, n, d)` cells,
/// each averaged over `distributions` random mixtures with `m` replicates.
///
/// Mixture `j` in dimension `d` is the same for every kernel and `n`.
pub fn improvement_grid(cfg: &ExperimentConfig) -> Result<GridReport> {
    let grid = cfg
        .grid
        .as_ref()
        .ok_or_else(|| KmseError::Config("missing [grid] section".into()))?;
    if cfg.mixture.is_some() {
        return Err(KmseError::Config("improvement-grid needs random mixtures, not a fixed [mixture]".into()));
    }
    if grid.n.is_empty() || grid.d.is_empty() || grid.distributions == 0 {
        return Err(KmseError::Config("[grid] needs nonempty n, d and distributions >= 1".into()));
    }
    let kernels = grid.kernels.clone().unwrap_or_else(|| vec![cfg.kernel]);
    let m = cfg.require_m()?;

    // Build and validate everything up front.
    let mut jobs = Vec::new();
    for kernel in &kernels {
        for &n in &grid.n {
            for &d in &grid.d {
                for j in 0..grid.distributions {
                    let mixture = cfg.mixture(Some(d), j as u64)?;
                    let mut sc = Scenario::new(
                        *kernel,
                        mixture,
                        cfg.estimators.clone(),
                        n,
                        m,
                        derive_seed(cfg.master_seed, STREAM_GRID, j as u64),
                    );
                    sc.baseline = cfg.baseline.clone();
                    sc.record_timing = cfg.record_timing;
                    sc.validate()?;
                    jobs.push((*kernel, n, d, j, sc));
                }
            }
        }
    }
    if !cfg.has_baseline() {
        return Err(KmseError::Config(format!("baseline {:?} is not among the estimators", cfg.baseline)));
    }

    let mut cells = Vec::new();
    for (kernel, n, d, j, sc) in &jobs {
        log::info!("grid {} n={n} d={d} distribution {j}", kernel.label());
        let rep = estimate_risk(sc)?;
        for s in &rep.summaries {
            cells.push(GridCell {
                kernel: kernel.label(),
                n: *n,
                d: *d,
                distribution: *j,
                estimator: s.estimator.clone(),
                mean_loss: s.mean_loss,
                pct_improve: s.pct_improve,
                n_failed: s.n_failed,
            });
        }
    }

    let mut summaries = Vec::new();
    for kernel in &kernels {
        for &n in &grid.n {
            for &d in &grid.d {
                for est in cfg.estimators.iter().map(|e| e.id()) {
                    let mut vals: Vec<f64> = cells
                        .iter()
                        .filter(|c| c.kernel == kernel.label() && c.n == n && c.d == d && c.estimator == est)
                        .filter_map(|c| c.pct_improve)
                        .collect();
                    let n_distributions = vals.len();
                    summaries.push(GridSummary {
                        kernel: kernel.label(),
                        n,
                        d,
                        estimator: est,
                        median_pct_improve: median(&mut vals),
                        n_distributions,
                    });
                }
            }
        }
    }
    Ok(GridReport { cells, summaries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvCheckRow {
    pub instance: usize,
    pub kernel: String,
    pub n: usize,
    pub lambda: f64,
    pub closed_form: f64,
    pub naive: f64,
    pub rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvCheckReport {
    pub rows: Vec<LoocvCheckRow>,
    pub max_rel_diff: f64,
    pub tolerance: f64,
}

impl LoocvCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_diff <= self.tolerance
    }
}

/// Compares the closed-form S-KMSE LOOCV score with explicit refitting on
/// random Gaussian samples.
pub fn loocv_check(section: &LoocvCheckSection, master_seed: u64) -> Result<LoocvCheckReport> {
    let s = section;
    if s.instances == 0 || s.kernels.is_empty() {
        return Err(KmseError::Config("[loocv_check] needs instances >= 1 and a kernel".into()));
    }
    if s.n_min < 2 || s.n_max < s.n_min {
        return Err(KmseError::Config(format!("[loocv_check] needs 2 <= n_min <= n_max, got {}..{}", s.n_min, s.n_max)));
    }
    let (lo, hi) = s.lambda_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(KmseError::Config(format!("[loocv_check] lambda_range ({lo}, {hi}) must be positive and ordered")));
    }
    if s.d == 0 {
        return Err(KmseError::Config("[loocv_check] d must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(s.instances);
    for i in 0..s.instances {
        let mut rng = rng_from_seed(derive_seed(master_seed, STREAM_LOOCV, i as u64));
        let kernel = s.kernels[i % s.kernels.len()];
        let n = rng.random_range(s.n_min..=s.n_max);
        let lambda = (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp();
        let x = DMatrix::from_fn(n, s.d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let spec = kernel.resolve(&x)?;
        let k = gram_matrix(&spec, &x)?;
        let closed_form = s_kmse_loocv_score(&k, lambda)?;
        let naive = s_kmse_loocv_score_naive(&k, lambda)?;
        let rel_diff = (closed_form - naive).abs() / naive.abs().max(f64::MIN_POSITIVE);
        rows.push(LoocvCheckRow { instance: i, kernel: kernel.label(), n, lambda, closed_form, naive, rel_diff });
    }
    let max_rel_diff = rows.iter().map(|r| r.rel_diff).fold(0.0, f64::max);
    Ok(LoocvCheckReport { rows, max_rel_diff, tolerance: s.tolerance })
}
