//! Regression trees: conditional inference trees and random forests.

mod ctree;
mod forest;

pub use ctree::fit_ctree;
pub use forest::{fit_random_forest, permutation_importance, Forest, ForestParams, ImportanceReport};

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat-arena binary regression tree. Node 0 is the root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        count: usize,
    },
}

impl Tree {
    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Route one row to its leaf value: `x <= threshold` goes left.
    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let needed = self.max_feature().map_or(0, |f| f + 1);
        if x.ncols() < needed {
            return Err(Error::DimensionMismatch {
                expected: needed,
                got: x.ncols(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tree prediction input"));
        }
        Ok(Array1::from_shape_fn(x.nrows(), |i| self.predict_row(x.row(i))))
    }

    fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }
}

/// Best single-feature split of `rows` by child-weighted squared error.
///
/// Candidate thresholds are midpoints of consecutive sorted unique values;
/// both children must keep at least `min_child` rows. Returns
/// `(threshold, weighted_sse)`; ties prefer the lower threshold.
pub(crate) fn best_split_on_feature(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    rows: &[usize],
    feature: usize,
    min_child: usize,
) -> Option<(f64, f64)> {
    let m = rows.len();
    if m < 2 * min_child.max(1) {
        return None;
    }
    let mut pairs: Vec<(f64, f64)> = rows.iter().map(|&i| (x[[i, feature]], y[i])).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let total_sum: f64 = pairs.iter().map(|p| p.1).sum();
    let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
    let mut left_sum = 0.0;
    let mut left_sq = 0.0;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..m - 1 {
        left_sum += pairs[i].1;
        left_sq += pairs[i].1 * pairs[i].1;
        if pairs[i].0 == pairs[i + 1].0 {
            continue; // not a unique-value boundary
        }
        let nl = i + 1;
        let nr = m - nl;
        if nl < min_child.max(1) || nr < min_child.max(1) {
            continue;
        }
        let sse_l = left_sq - left_sum * left_sum / nl as f64;
        let right_sum = total_sum - left_sum;
        let sse_r = (total_sq - left_sq) - right_sum * right_sum / nr as f64;
        let sse = sse_l + sse_r;
        let threshold = 0.5 * (pairs[i].0 + pairs[i + 1].0);
        let better = match best {
            None => true,
            Some((_, bsse)) => sse < bsse,
        };
        if better {
            best = Some((threshold, sse));
        }
    }
    best
}

pub(crate) fn mean_of(y: ArrayView1<'_, f64>, rows: &[usize]) -> f64 {
    rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64
}
