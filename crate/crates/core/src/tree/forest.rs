//! Random forest regression with out-of-bag permutation importance.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

use super::{best_split_on_feature, mean_of, Node, Tree};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features sampled per split; `None` means `max(1, round(p/3))`.
    pub mtry: Option<usize>,
    /// Nodes with more than this many rows keep splitting.
    pub min_node: usize,
    /// Draw bootstrap samples; disabling uses every row in every tree
    /// (and leaves the out-of-bag sets empty).
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            mtry: None,
            min_node: 5,
            bootstrap: true,
        }
    }
}

/// Bagged ensemble of fully-grown trees; prediction is the exact mean of
/// the member trees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Out-of-bag row indices per tree.
    pub oob: Vec<Vec<usize>>,
    pub mtry: usize,
    pub params: ForestParams,
    pub seed: u64,
}

impl Forest {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forest prediction input"));
        }
        let mut acc = Array1::zeros(x.nrows());
        for tree in &self.trees {
            acc += &tree.predict(x)?;
        }
        Ok(acc / self.trees.len() as f64)
    }
}

/// Default feature sample size: a third of the predictors.
pub fn default_mtry(p: usize) -> usize {
    ((p as f64 / 3.0).round() as usize).max(1)
}

/// Grow a random forest. Each tree draws its own bootstrap sample and a
/// fresh feature subset per split, with all randomness derived from
/// `(seed, tree index)` so trees are reproducible and grown in parallel.
pub fn fit_random_forest(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    params: ForestParams,
    seed: u64,
) -> Result<Forest> {
    if params.n_trees < 1 {
        return Err(Error::InvalidParam("need at least 1 tree".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyData);
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forest input"));
    }
    let n = x.nrows();
    let p = x.ncols();
    let mtry = params.mtry.unwrap_or_else(|| default_mtry(p)).clamp(1, p);

    let grown: Vec<(Tree, Vec<usize>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = util::rng_from_seed(util::derive_seed(seed, t as u64));
            let (rows, oob) = if params.bootstrap {
                let mut in_bag = vec![false; n];
                let rows: Vec<usize> = (0..n)
                    .map(|_| {
                        let i = rng.random_range(0..n);
                        in_bag[i] = true;
                        i
                    })
                    .collect();
                let oob = (0..n).filter(|&i| !in_bag[i]).collect();
                (rows, oob)
            } else {
                ((0..n).collect(), Vec::new())
            };
            (grow_cart(x, y, rows, mtry, params.min_node, &mut rng), oob)
        })
        .collect();

    let (trees, oob) = grown.into_iter().unzip();
    Ok(Forest {
        trees,
        oob,
        mtry,
        params,
        seed,
    })
}

/// CART growth: split any node with more rows than `min_node`, choosing the
/// best (feature, threshold) among a fresh random subset of `mtry` features.
fn grow_cart(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    rows: Vec<usize>,
    mtry: usize,
    min_node: usize,
    rng: &mut rand_chacha::ChaCha20Rng,
) -> Tree {
    let p = x.ncols();
    let mut feature_pool: Vec<usize> = (0..p).collect();
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0, count: 0 }];
    let mut stack = vec![(0usize, rows)];
    while let Some((slot, rows)) = stack.pop() {
        let mut split = None;
        if rows.len() > min_node {
            feature_pool.shuffle(rng);
            let mut best: Option<(f64, usize, f64)> = None; // (sse, feature, threshold)
            let mut candidates: Vec<usize> = feature_pool[..mtry].to_vec();
            candidates.sort_unstable();
            for &j in &candidates {
                if let Some((threshold, sse)) = best_split_on_feature(x, y, &rows, j, 1) {
                    let better = match best {
                        None => true,
                        Some((bsse, bj, bt)) => {
                            sse < bsse || (sse == bsse && (j < bj || (j == bj && threshold < bt)))
                        }
                    };
                    if better {
                        best = Some((sse, j, threshold));
                    }
                }
            }
            split = best;
        }
        match split {
            None => {
                nodes[slot] = Node::Leaf {
                    value: mean_of(y, &rows),
                    count: rows.len(),
                };
            }
            Some((_, feature, threshold)) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| x[[i, feature]] <= threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0, count: 0 });
                let right = nodes.len();
                nodes.push(Node::Leaf { value: 0.0, count: 0 });
                nodes[slot] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                stack.push((right, right_rows));
                stack.push((left, left_rows));
            }
        }
    }
    Tree { nodes }
}

/// Per-feature permutation importance with ranks (1 = most important).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub feature_names: Vec<String>,
    /// Mean out-of-bag squared-error increase when the feature is permuted.
    pub importance: Vec<f64>,
    pub rank: Vec<usize>,
}

impl ImportanceReport {
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "feature,importance,rank")?;
        for i in 0..self.importance.len() {
            writeln!(f, "{},{},{}", self.feature_names[i], self.importance[i], self.rank[i])?;
        }
        Ok(())
    }
}

/// Permutation importance over the out-of-bag rows of each tree: permute one
/// column, re-predict, and average the squared-error increase across trees.
pub fn permutation_importance(
    forest: &Forest,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    feature_names: &[String],
    seed: u64,
) -> Result<ImportanceReport> {
    let p = x.ncols();
    if forest.oob.iter().all(|o| o.is_empty()) {
        return Err(Error::EmptyOob);
    }
    let deltas: Vec<Vec<f64>> = forest
        .trees
        .par_iter()
        .zip(forest.oob.par_iter())
        .enumerate()
        .filter(|(_, (_, oob))| !oob.is_empty())
        .map(|(t, (tree, oob))| {
            let base_mse = oob_mse(tree, x, y, oob, None, &[]);
            (0..p)
                .map(|j| {
                    let mut order: Vec<usize> = (0..oob.len()).collect();
                    let mut rng =
                        util::rng_from_seed(util::derive_seed(util::derive_seed(seed, t as u64), j as u64));
                    order.shuffle(&mut rng);
                    oob_mse(tree, x, y, oob, Some(j), &order) - base_mse
                })
                .collect()
        })
        .collect();

    let importance: Vec<f64> = (0..p)
        .map(|j| deltas.iter().map(|d| d[j]).sum::<f64>() / deltas.len() as f64)
        .collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        importance[b]
            .partial_cmp(&importance[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut rank = vec![0usize; p];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r + 1;
    }
    Ok(ImportanceReport {
        feature_names: feature_names.to_vec(),
        importance,
        rank,
    })
}

/// OOB squared error, optionally with feature `permute` read through the
/// shuffled `order` of OOB positions.
fn oob_mse(
    tree: &Tree,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    oob: &[usize],
    permute: Option<usize>,
    order: &[usize],
) -> f64 {
    let mut sse = 0.0;
    let mut row_buf = vec![0.0f64; x.ncols()];
    for (pos, &i) in oob.iter().enumerate() {
        for c in 0..x.ncols() {
            row_buf[c] = x[[i, c]];
        }
        if let Some(j) = permute {
            row_buf[j] = x[[oob[order[pos]], j]];
        }
        let pred = tree.predict_row(ArrayView1::from(&row_buf));
        let e = pred - y[i];
        sse += e * e;
    }
    sse / oob.len() as f64
}
