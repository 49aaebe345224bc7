//! Tabular dataset loading, standardization, splitting, and interaction
//! expansion.

use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

/// An n x p predictor matrix with an outcome vector and column names.
///
/// Invariants enforced at construction: at least one row and one column,
/// every value finite, feature names unique.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub outcome: Array1<f64>,
    pub feature_names: Vec<String>,
    pub outcome_name: String,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        outcome: Array1<f64>,
        feature_names: Vec<String>,
        outcome_name: String,
    ) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::EmptyData);
        }
        if outcome.len() != features.nrows() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                got: outcome.len(),
            });
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                got: feature_names.len(),
            });
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.clone()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        if features.iter().any(|v| !v.is_finite()) || outcome.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Dataset {
            features,
            outcome,
            feature_names,
            outcome_name,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    /// Dataset restricted to the given rows, order preserved.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let features = self.features.select(Axis(0), rows);
        let outcome = self.outcome.select(Axis(0), rows);
        Dataset {
            features,
            outcome,
            feature_names: self.feature_names.clone(),
            outcome_name: self.outcome_name.clone(),
        }
    }
}

/// Per-column standardization parameters fitted by [`standardize`].
///
/// Constant columns are dropped rather than scaled; their names are kept so
/// the same columns can be dropped from prediction-time data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingParams {
    /// Names of retained columns, in output order.
    pub kept: Vec<String>,
    /// Mean of each retained column.
    pub means: Vec<f64>,
    /// Standard deviation (n-1 denominator) of each retained column;
    /// strictly positive.
    pub sds: Vec<f64>,
    /// Names of constant columns that were dropped.
    pub dropped: Vec<String>,
}

impl ScalingParams {
    /// Apply the fitted scaling to another dataset with the same schema.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let mut cols = Vec::with_capacity(self.kept.len());
        for name in &self.kept {
            let j = ds
                .feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
            cols.push(j);
        }
        let n = ds.n();
        let mut out = Array2::zeros((n, cols.len()));
        for (jj, &j) in cols.iter().enumerate() {
            for i in 0..n {
                out[[i, jj]] = (ds.features[[i, j]] - self.means[jj]) / self.sds[jj];
            }
        }
        Dataset::new(out, ds.outcome.clone(), self.kept.clone(), ds.outcome_name.clone())
    }

    /// Invert the scaling on a standardized dataset.
    pub fn unscale(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.p() != self.kept.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kept.len(),
                got: ds.p(),
            });
        }
        let n = ds.n();
        let mut out = Array2::zeros((n, self.kept.len()));
        for j in 0..self.kept.len() {
            for i in 0..n {
                out[[i, j]] = ds.features[[i, j]] * self.sds[j] + self.means[j];
            }
        }
        Dataset::new(out, ds.outcome.clone(), self.kept.clone(), ds.outcome_name.clone())
    }
}

/// Load a CSV file with a header row, extracting `outcome_column` as the
/// outcome and every other column as a feature. Row order is preserved.
pub fn load_csv<P: AsRef<Path>>(path: P, outcome_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let outcome_idx = headers
        .iter()
        .position(|h| h == outcome_column)
        .ok_or_else(|| Error::UnknownColumn(outcome_column.to_string()))?;

    let mut features: Vec<f64> = Vec::new();
    let mut outcome: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::BadCell {
                row: i + 2, // 1-based, after the header line
                column: "<row width>".to_string(),
                value: format!("{} cells, expected {}", record.len(), headers.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let parsed: f64 = cell.trim().parse().map_err(|_| Error::BadCell {
                row: i + 2,
                column: headers[j].clone(),
                value: cell.to_string(),
            })?;
            if !parsed.is_finite() {
                return Err(Error::BadCell {
                    row: i + 2,
                    column: headers[j].clone(),
                    value: cell.to_string(),
                });
            }
            if j == outcome_idx {
                outcome.push(parsed);
            } else {
                features.push(parsed);
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let p = headers.len() - 1;
    if p == 0 {
        return Err(Error::EmptyData);
    }
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != outcome_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let features = Array2::from_shape_vec((n, p), features).expect("rectangular by construction");
    Dataset::new(features, Array1::from_vec(outcome), feature_names, outcome_column.to_string())
}

/// Center and scale each feature column to mean 0, sd 1 (n-1 denominator).
///
/// Constant columns are dropped and recorded in the returned params; the
/// outcome is untouched. Errors only when every column is constant.
pub fn standardize(ds: &Dataset) -> Result<(Dataset, ScalingParams)> {
    let n = ds.n();
    let mut kept = Vec::new();
    let mut means = Vec::new();
    let mut sds = Vec::new();
    let mut dropped = Vec::new();
    let mut kept_idx = Vec::new();
    for j in 0..ds.p() {
        let col: Vec<f64> = ds.features.column(j).to_vec();
        let m = util::mean(&col);
        let sd = util::variance(&col).sqrt();
        if sd > 0.0 {
            kept.push(ds.feature_names[j].clone());
            means.push(m);
            sds.push(sd);
            kept_idx.push(j);
        } else {
            dropped.push(ds.feature_names[j].clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::AllColumnsConstant);
    }
    let mut out = Array2::zeros((n, kept_idx.len()));
    for (jj, &j) in kept_idx.iter().enumerate() {
        for i in 0..n {
            out[[i, jj]] = (ds.features[[i, j]] - means[jj]) / sds[jj];
        }
    }
    let scaled = Dataset::new(out, ds.outcome.clone(), kept.clone(), ds.outcome_name.clone())?;
    Ok((scaled, ScalingParams { kept, means, sds, dropped }))
}

/// Split rows into disjoint train/test sets by seeded uniform permutation.
///
/// Train size is `round(n * train_fraction)`.
pub fn train_test_split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = ds.n();
    let n_train = (n as f64 * train_fraction).round() as usize;
    let n_train = n_train.clamp(1, n.saturating_sub(1).max(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut util::rng_from_seed(util::derive_seed(seed, 0x5911)));
    let mut train_rows: Vec<usize> = order[..n_train].to_vec();
    let mut test_rows: Vec<usize> = order[n_train..].to_vec();
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok((ds.subset(&train_rows), ds.subset(&test_rows)))
}

/// Append all pairwise products x_j * x_k (j < k) as extra columns named
/// `"j:k"` from the parent column names. No squares, originals first.
pub fn expand_interactions(ds: &Dataset) -> Dataset {
    let (features, names) = expand_interactions_matrix(ds.features.view(), &ds.feature_names);
    Dataset {
        features,
        outcome: ds.outcome.clone(),
        feature_names: names,
        outcome_name: ds.outcome_name.clone(),
    }
}

/// Matrix-level interaction expansion, shared with learners that expand
/// internally at predict time.
pub fn expand_interactions_matrix(
    x: ArrayView2<'_, f64>,
    names: &[String],
) -> (Array2<f64>, Vec<String>) {
    let n = x.nrows();
    let p = x.ncols();
    let total = p + p * (p - 1) / 2;
    let mut out = Array2::zeros((n, total));
    let mut out_names = Vec::with_capacity(total);
    for j in 0..p {
        out.column_mut(j).assign(&x.column(j));
        out_names.push(names[j].clone());
    }
    let mut c = p;
    for j in 0..p {
        for k in (j + 1)..p {
            for i in 0..n {
                out[[i, c]] = x[[i, j]] * x[[i, k]];
            }
            out_names.push(format!("{}:{}", names[j], names[k]));
            c += 1;
        }
    }
    (out, out_names)
}
