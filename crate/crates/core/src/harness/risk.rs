use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use super::config::{Scenario, STREAM_SAMPLE};
use crate::error::{KmseError, Result};
use crate::estimators::Estimate;
use crate::kernels::{gram_matrix, KernelSpec};
use crate::moments::GroundTruth;
use crate::synthgen::{derive_seed, rng_from_seed, MixtureSampler};

/// One estimator on one replicate. `loss` is `None` when the estimator
/// failed; `error` then says why.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub replicate: usize,
    pub estimator: String,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub loss: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub mean_loss: Option<f64>,
    /// Standard error of the mean; absent with fewer than two losses.
    pub se: Option<f64>,
    pub prob_improve: Option<f64>,
    pub pct_improve: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub estimators: Vec<String>,
    pub baseline: String,
    pub m: usize,
    /// Replicate-major, estimators in config order within a replicate.
    pub records: Vec<ResultRecord>,
    pub summaries: Vec<EstimatorSummary>,
}

impl RiskReport {
    pub fn summary(&self, id: &str) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == id)
    }

    /// Losses of one estimator indexed by replicate.
    pub fn losses(&self, id: &str) -> Vec<Option<f64>> {
        let mut out = vec![None; self.m];
        for r in self.records.iter().filter(|r| r.estimator == id) {
            out[r.replicate] = r.loss;
        }
        out
    }
}

/// Monte Carlo risk of every configured estimator.
///
/// Replicate `r` draws its sample from seed `derive_seed(master, SAMPLE, r)`,
/// and every estimator in the replicate sees that sample and its Gram
/// matrix. Replicates run on the current rayon pool and are reduced in
/// replicate order, so results do not depend on the thread count.
pub fn estimate_risk(sc: &Scenario) -> Result<RiskReport> {
    sc.validate()?;
    let sampler = MixtureSampler::new(&sc.mixture)?;
    let fixed_truth = match sc.kernel {
        super::KernelChoice::Fixed(spec) => Some(GroundTruth::new(&spec, &sc.mixture)?),
        super::KernelChoice::MedianRbf => None,
    };
    let per_rep: Vec<Vec<ResultRecord>> = (0..sc.m)
        .into_par_iter()
        .map(|r| run_replicate(sc, &sampler, fixed_truth.as_ref(), r))
        .collect();
    let records: Vec<ResultRecord> = per_rep.into_iter().flatten().collect();
    let estimators: Vec<String> = sc.estimators.iter().map(|e| e.id()).collect();
    let summaries = summarize(&records, &estimators, &sc.baseline, sc.m);
    Ok(RiskReport {
        estimators,
        baseline: sc.baseline.clone(),
        m: sc.m,
        records,
        summaries,
    })
}

fn run_replicate(
    sc: &Scenario,
    sampler: &MixtureSampler,
    fixed_truth: Option<&GroundTruth>,
    r: usize,
) -> Vec<ResultRecord> {
    let mut rng = rng_from_seed(derive_seed(sc.master_seed, STREAM_SAMPLE, r as u64));
    let x = sampler.sample(sc.n, &mut rng);

    let failed = |e: &KmseError| -> Vec<ResultRecord> {
        log::debug!("replicate {r}: {e}");
        sc.estimators
            .iter()
            .map(|est| ResultRecord {
                replicate: r,
                estimator: est.id(),
                alpha: None,
                lambda: None,
                loss: None,
                runtime_ms: None,
                error: Some(e.to_string()),
            })
            .collect()
    };

    let setup = (|| -> Result<(KernelSpec, _, Option<GroundTruth>)> {
        let spec = sc.kernel.resolve(&x)?;
        let k = gram_matrix(&spec, &x)?;
        let own_truth = match fixed_truth {
            Some(_) => None,
            None => Some(GroundTruth::new(&spec, &sc.mixture)?),
        };
        Ok((spec, k, own_truth))
    })();
    let (spec, k, own_truth) = match setup {
        Ok(v) => v,
        Err(e) => return failed(&e),
    };
    let truth = fixed_truth.or(own_truth.as_ref()).expect("one of the two is set");
    let mu_at_x: DVector<f64> = match truth.mean_embedding_at_rows(&x) {
        Ok(v) => v,
        Err(e) => return failed(&e),
    };

    sc.estimators
        .iter()
        .map(|est| {
            let start = Instant::now();
            let fitted = est.fit(&k, &x, &spec);
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            let mut rec = ResultRecord {
                replicate: r,
                estimator: est.id(),
                alpha: None,
                lambda: None,
                loss: None,
                runtime_ms: sc.record_timing.then_some(elapsed),
                error: None,
            };
            let scored = fitted.and_then(|f| {
                rec.alpha = f.alpha;
                rec.lambda = f.lambda;
                match f.estimate {
                    Estimate::Weights(w) => Ok(truth.loss_from_parts(k.entries(), &mu_at_x, &w)),
                    Estimate::Expansion(e) => truth.true_loss(&e),
                }
            });
            match scored {
                Ok(loss) => rec.loss = Some(loss),
                Err(e) => {
                    log::debug!("replicate {r}, {}: {e}", rec.estimator);
                    rec.error = Some(e.to_string());
                }
            }
            rec
        })
        .collect()
}

fn mean_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let k = values.len();
    if k == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    (Some(mean), Some((var / k as f64).sqrt()))
}

pub(crate) fn summarize(records: &[ResultRecord], ids: &[String], baseline: &str, m: usize) -> Vec<EstimatorSummary> {
    let losses = |id: &str| -> Vec<Option<f64>> {
        let mut out = vec![None; m];
        for r in records.iter().filter(|r| r.estimator == id) {
            out[r.replicate] = r.loss;
        }
        out
    };
    let base = ids.iter().any(|i| i == baseline).then(|| losses(baseline));
    let base_mean = base.as_ref().and_then(|b| mean_se(&b.iter().flatten().copied().collect::<Vec<_>>()).0);
    ids.iter()
        .map(|id| {
            let l = losses(id);
            let ok: Vec<f64> = l.iter().flatten().copied().collect();
            let (mean_loss, se) = mean_se(&ok);
            let prob_improve = base.as_ref().and_then(|b| paired_fraction(&l, b));
            let pct_improve = match (base_mean, mean_loss) {
                (Some(b), Some(e)) if b > 0.0 => Some(100.0 * (b - e) / b),
                _ => None,
            };
            EstimatorSummary {
                estimator: id.clone(),
                mean_loss,
                se,
                prob_improve,
                pct_improve,
                n_ok: ok.len(),
                n_failed: m - ok.len(),
            }
        })
        .collect()
}

/// Fraction of replicates, among those where both succeeded, with a strictly
/// smaller loss than the baseline.
fn paired_fraction(est: &[Option<f64>], base: &[Option<f64>]) -> Option<f64> {
    let mut pairs = 0usize;
    let mut wins = 0usize;
    for (e, b) in est.iter().zip(base) {
        if let (Some(e), Some(b)) = (e, b) {
            pairs += 1;
            if e < b {
                wins += 1;
            }
        }
    }
    (pairs > 0).then(|| wins as f64 / pairs as f64)
}

/// Per estimator, the fraction of replicates beating `baseline`.
pub fn probability_of_improvement(report: &RiskReport, baseline: &str) -> Result<Vec<(String, Option<f64>)>> {
    if !report.estimators.iter().any(|e| e == baseline) {
        return Err(KmseError::InvalidArgument(format!("baseline {baseline:?} not in report")));
    }
    let base = report.losses(baseline);
    Ok(report
        .estimators
        .iter()
        .map(|id| (id.clone(), paired_fraction(&report.losses(id), &base)))
        .collect())
}

/// `100 (l_base - l_est) / l_base` on replicate-mean losses.
pub fn percentage_improvement(report: &RiskReport, baseline: &str) -> Result<Vec<(String, f64)>> {
    let base = report
        .summary(baseline)
        .ok_or_else(|| KmseError::InvalidArgument(format!("baseline {baseline:?} not in report")))?;
    let b = match base.mean_loss {
        Some(b) if b > 0.0 => b,
        _ => {
            return Err(KmseError::Degenerate(format!(
                "baseline {baseline:?} has no positive mean loss"
            )))
        }
    };
    report
        .summaries
        .iter()
        .map(|s| {
            s.mean_loss
                .map(|e| (s.estimator.clone(), 100.0 * (b - e) / b))
                .ok_or_else(|| KmseError::Degenerate(format!("estimator {:?} failed on every replicate", s.estimator)))
        })
        .collect()
}
