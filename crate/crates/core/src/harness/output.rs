//! CSV output. Missing values are empty cells; floats use the shortest
//! representation that round-trips.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::experiments::{GridReport, LoocvCheckReport, SweepReport};
use super::risk::{EstimatorSummary, ResultRecord};
use crate::error::{KmseError, Result};

pub const RECORDS_HEADER: [&str; 6] = ["replicate", "estimator", "alpha", "lambda", "loss", "runtime_ms"];
pub const SUMMARY_HEADER: [&str; 6] = ["estimator", "mean_loss", "se", "prob_improve", "pct_improve", "n_failed"];

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> KmseError {
    KmseError::Io(e.to_string())
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    Ok(out)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| KmseError::Io(e.to_string()))
}

fn record_cells(r: &ResultRecord) -> [String; 6] {
    [
        r.replicate.to_string(),
        r.estimator.clone(),
        opt(r.alpha),
        opt(r.lambda),
        opt(r.loss),
        opt(r.runtime_ms),
    ]
}

fn summary_cells(s: &EstimatorSummary) -> [String; 6] {
    [
        s.estimator.clone(),
        opt(s.mean_loss),
        opt(s.se),
        opt(s.prob_improve),
        opt(s.pct_improve),
        s.n_failed.to_string(),
    ]
}

pub fn write_records<W: Write>(w: W, records: &[ResultRecord]) -> Result<()> {
    let mut out = writer(w, &RECORDS_HEADER)?;
    for r in records {
        out.write_record(record_cells(r)).map_err(csv_err)?;
    }
    finish(out)
}

pub fn write_summary<W: Write>(w: W, summaries: &[EstimatorSummary]) -> Result<()> {
    let mut out = writer(w, &SUMMARY_HEADER)?;
    for s in summaries {
        out.write_record(summary_cells(s)).map_err(csv_err)?;
    }
    finish(out)
}

/// Long format: one row per (value, estimator).
pub fn write_sweep<W: Write>(w: W, rep: &SweepReport) -> Result<()> {
    let header: Vec<&str> = ["axis", "value"].into_iter().chain(SUMMARY_HEADER).collect();
    let mut out = writer(w, &header)?;
    for (v, r) in &rep.points {
        for s in &r.summaries {
            let mut row = vec![rep.axis.name().to_string(), fmt_f64(*v)];
            row.extend(summary_cells(s));
            out.write_record(row).map_err(csv_err)?;
        }
    }
    finish(out)
}

/// Every per-replicate record of a sweep, prefixed by the axis value.
pub fn write_sweep_records<W: Write>(w: W, rep: &SweepReport) -> Result<()> {
    let header: Vec<&str> = ["axis", "value"].into_iter().chain(RECORDS_HEADER).collect();
    let mut out = writer(w, &header)?;
    for (v, r) in &rep.points {
        for rec in &r.records {
            let mut row = vec![rep.axis.name().to_string(), fmt_f64(*v)];
            row.extend(record_cells(rec));
            out.write_record(row).map_err(csv_err)?;
        }
    }
    finish(out)
}

pub fn write_grid_cells<W: Write>(w: W, rep: &GridReport) -> Result<()> {
    let mut out = writer(
        w,
        &["kernel", "n", "d", "distribution", "estimator", "mean_loss", "pct_improve", "n_failed"],
    )?;
    for c in &rep.cells {
        out.write_record([
            c.kernel.clone(),
            c.n.to_string(),
            c.d.to_string(),
            c.distribution.to_string(),
            c.estimator.clone(),
            opt(c.mean_loss),
            opt(c.pct_improve),
            c.n_failed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(out)
}

pub fn write_grid_summary<W: Write>(w: W, rep: &GridReport) -> Result<()> {
    let mut out = writer(w, &["kernel", "n", "d", "estimator", "median_pct_improve", "n_distributions"])?;
    for s in &rep.summaries {
        out.write_record([
            s.kernel.clone(),
            s.n.to_string(),
            s.d.to_string(),
            s.estimator.clone(),
            opt(s.median_pct_improve),
            s.n_distributions.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(out)
}

pub fn write_loocv_check<W: Write>(w: W, rep: &LoocvCheckReport) -> Result<()> {
    let mut out = writer(w, &["instance", "kernel", "n", "lambda", "closed_form", "naive", "rel_diff"])?;
    for r in &rep.rows {
        out.write_record([
            r.instance.to_string(),
            r.kernel.clone(),
            r.n.to_string(),
            fmt_f64(r.lambda),
            fmt_f64(r.closed_form),
            fmt_f64(r.naive),
            fmt_f64(r.rel_diff),
        ])
        .map_err(csv_err)?;
    }
    finish(out)
}

/// Creates `path` and hands a buffered writer to `body`.
pub fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| KmseError::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| KmseError::Io(format!("{}: {e}", path.display())))
}
