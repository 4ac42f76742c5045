use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::error::{KmseError, Result};
use crate::kernels::Points;
use crate::synthgen::rng_from_seed;

/// Features with one class id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Points,
    pub labels: Vec<String>,
    pub feature_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(features: Points, labels: Vec<String>, feature_names: Vec<String>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(KmseError::DimensionMismatch { expected: features.nrows(), got: labels.len() });
        }
        if feature_names.len() != features.ncols() {
            return Err(KmseError::DimensionMismatch { expected: features.ncols(), got: feature_names.len() });
        }
        Ok(Self { features, labels, feature_names })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sorted distinct class ids.
    pub fn classes(&self) -> Vec<String> {
        let mut c = self.labels.clone();
        c.sort();
        c.dedup();
        c
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Reads a headered CSV; every column except `label_column` must be numeric.
pub fn read_csv<R: Read>(reader: R, label_column: &str) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| KmseError::Data(e.to_string()))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| KmseError::Data(format!("label column {label_column:?} not in header")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let d = feature_names.len();
    if d == 0 {
        return Err(KmseError::Data("no feature columns".into()));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| KmseError::Data(e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != headers.len() {
            return Err(KmseError::Data(format!(
                "line {line}: expected {} fields, found {}",
                headers.len(),
                rec.len()
            )));
        }
        for (i, field) in rec.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                KmseError::Data(format!("line {line}: column {:?} is not numeric: {field:?}", &headers[i]))
            })?;
            if !v.is_finite() {
                return Err(KmseError::Data(format!("line {line}: column {:?} is not finite", &headers[i])));
            }
            values.push(v);
        }
        let label = &rec[label_idx];
        if label.is_empty() {
            return Err(KmseError::Data(format!("line {line}: empty label")));
        }
        labels.push(label.to_string());
    }
    if labels.is_empty() {
        return Err(KmseError::Data("no data rows".into()));
    }
    let features = DMatrix::from_row_slice(labels.len(), d, &values);
    LabeledDataset::new(features, labels, feature_names)
}

pub fn read_csv_file(path: &Path, label_column: &str) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path).map_err(|e| KmseError::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, label_column).map_err(|e| match e {
        KmseError::Data(m) => KmseError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Per-feature standardisation fitted on one dataset and applied to others.
/// Features that are constant in the fitting data are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    pub means: DVector<f64>,
    pub stds: DVector<f64>,
}

impl Normalization {
    /// Means and population standard deviations of each column.
    pub fn fit(x: &Points) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(KmseError::InsufficientSample { required: 1, got: 0 });
        }
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        let mut means = Vec::new();
        let mut stds = Vec::new();
        for j in 0..x.ncols() {
            let col = x.column(j);
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            if sd <= 1e-12 * mean.abs().max(1.0) {
                dropped.push(j);
            } else {
                kept.push(j);
                means.push(mean);
                stds.push(sd);
            }
        }
        if kept.is_empty() {
            return Err(KmseError::Data("every feature is constant".into()));
        }
        Ok(Self { kept, dropped, means: DVector::from_vec(means), stds: DVector::from_vec(stds) })
    }

    pub fn apply(&self, x: &Points) -> Points {
        DMatrix::from_fn(x.nrows(), self.kept.len(), |i, k| (x[(i, self.kept[k])] - self.means[k]) / self.stds[k])
    }

    pub fn apply_dataset(&self, data: &LabeledDataset) -> LabeledDataset {
        LabeledDataset {
            features: self.apply(&data.features),
            labels: data.labels.clone(),
            feature_names: self.kept.iter().map(|&j| data.feature_names[j].clone()).collect(),
        }
    }
}

fn shuffled_by_class(labels: &[String], seed: u64) -> BTreeMap<&str, Vec<usize>> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_str()).or_default().push(i);
    }
    let mut rng = rng_from_seed(seed);
    for idx in by_class.values_mut() {
        idx.shuffle(&mut rng);
    }
    by_class
}

/// Stratified `(train, test)` index split; each class sends
/// `round(test_fraction * n_c)` rows to the test set.
pub fn stratified_split(labels: &[String], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(KmseError::InvalidArgument(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for idx in shuffled_by_class(labels, seed).into_values() {
        let k = (test_fraction * idx.len() as f64).round() as usize;
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// `k` stratified folds: each class is dealt round-robin, continuing from
/// where the previous class stopped so fold sizes stay within one.
pub fn stratified_folds(labels: &[String], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(KmseError::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for idx in shuffled_by_class(labels, seed).into_values() {
        for i in idx {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
