//! Gradient boosting with componentwise linear baselearners.
//!
//! Squared-error loss: each iteration fits a univariate no-intercept OLS of
//! the current residual on every candidate column, keeps the one with the
//! lowest residual sum of squares, and takes a shrunken step `nu` toward it.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::expand_interactions_matrix;
use crate::error::{Error, Result};

/// Boosted componentwise linear model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostedModel {
    /// Outcome mean; the model's constant term.
    pub intercept: f64,
    /// (feature index in model space, shrunken coefficient) per iteration.
    pub steps: Vec<(usize, f64)>,
    pub nu: f64,
    /// Base feature names (before any interaction expansion).
    pub feature_names: Vec<String>,
    /// When set, prediction expands pairwise interactions exactly as fitting
    /// did, so inputs use the base feature space.
    pub with_interactions: bool,
}

impl BoostedModel {
    /// Dense coefficient vector over the model feature space.
    pub fn coefficients(&self, model_p: usize) -> Array1<f64> {
        let mut coefs = Array1::zeros(model_p);
        for &(j, c) in &self.steps {
            coefs[j] += c;
        }
        coefs
    }

    /// Names in the model feature space (after expansion when enabled).
    pub fn model_feature_names(&self) -> Vec<String> {
        if self.with_interactions {
            let mut names = self.feature_names.clone();
            let p = self.feature_names.len();
            for j in 0..p {
                for k in (j + 1)..p {
                    names.push(format!("{}:{}", self.feature_names[j], self.feature_names[k]));
                }
            }
            names
        } else {
            self.feature_names.clone()
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_names.len(),
                got: x.ncols(),
            });
        }
        let expanded: Array2<f64>;
        let xm: ArrayView2<'_, f64> = if self.with_interactions {
            expanded = expand_interactions_matrix(x, &self.feature_names).0;
            expanded.view()
        } else {
            x
        };
        let mut preds = Array1::from_elem(x.nrows(), self.intercept);
        let model_p = xm.ncols();
        let coefs = self.coefficients(model_p);
        for j in 0..model_p {
            let c = coefs[j];
            if c != 0.0 {
                for i in 0..x.nrows() {
                    preds[i] += c * xm[[i, j]];
                }
            }
        }
        Ok(preds)
    }
}

/// Fit by greedy componentwise boosting for `m_stop` iterations with step
/// length `nu`. When `with_interactions` is set the candidate columns are
/// the originals plus all pairwise products.
pub fn fit_boosted_linear(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    m_stop: usize,
    nu: f64,
    with_interactions: bool,
    feature_names: &[String],
) -> Result<BoostedModel> {
    if m_stop < 1 {
        return Err(Error::InvalidParam("m_stop must be at least 1".into()));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidParam(format!("nu must be in (0, 1], got {nu}")));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("boosting input"));
    }

    let expanded: Array2<f64>;
    let xm: ArrayView2<'_, f64> = if with_interactions {
        expanded = expand_interactions_matrix(x, feature_names).0;
        expanded.view()
    } else {
        x
    };
    let n = xm.nrows();
    let p = xm.ncols();
    let col_ss: Vec<f64> = (0..p)
        .map(|j| xm.column(j).iter().map(|v| v * v).sum::<f64>())
        .collect();

    let intercept = y.sum() / n as f64;
    let mut residual: Array1<f64> = y.to_owned() - intercept;
    let mut steps = Vec::with_capacity(m_stop);
    for _ in 0..m_stop {
        // RSS_j = ||r||^2 - b_j^2 * ss_j, so the best column maximizes
        // b_j^2 * ss_j = (x_j^T r)^2 / ss_j.
        let mut best: Option<(f64, usize, f64)> = None; // (gain, j, b_j)
        for j in 0..p {
            if col_ss[j] == 0.0 {
                continue;
            }
            let dot: f64 = xm
                .column(j)
                .iter()
                .zip(residual.iter())
                .map(|(a, b)| a * b)
                .sum();
            let gain = dot * dot / col_ss[j];
            if best.map_or(true, |(g, _, _)| gain > g) {
                best = Some((gain, j, dot / col_ss[j]));
            }
        }
        let Some((_, j, b)) = best else { break };
        let coef = nu * b;
        for i in 0..n {
            residual[i] -= coef * xm[[i, j]];
        }
        steps.push((j, coef));
    }

    Ok(BoostedModel {
        intercept,
        steps,
        nu,
        feature_names: feature_names.to_vec(),
        with_interactions,
    })
}
