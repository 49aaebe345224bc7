//! Discrete Morse-Smale complex of an outcome over a KNN graph.
//!
//! The outcome plays the role of a Morse function sampled at the data
//! points. Steepest ascent/descent targets over graph neighbors define a
//! gradient flow; points flowing to the same (local max, local min) pair
//! form a crystal. Persistence-based cancellation of shallow extrema builds
//! a merge hierarchy, and a partition policy picks the level used for
//! piecewise regression.

mod hierarchy;
mod partition;

pub use hierarchy::{build_hierarchy, MergeEvent, MsHierarchy, Side};
pub use partition::{partition_at, LevelSelector, PartitionPolicy, Partitioning};

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::KnnGraph;

/// Per-point steepest ascent/descent targets. `None` marks a local
/// extremum (no strictly better neighbor).
#[derive(Debug, Clone)]
pub struct GradientFlow {
    pub ascent: Vec<Option<usize>>,
    pub descent: Vec<Option<usize>>,
}

impl GradientFlow {
    pub fn n(&self) -> usize {
        self.ascent.len()
    }
}

/// One cell of the complex: the points whose ascent ends at `max_point`
/// and descent ends at `min_point`.
#[derive(Debug, Clone)]
pub struct Crystal {
    pub max_point: usize,
    pub min_point: usize,
    pub members: Vec<usize>,
}

/// Steepest-neighbor targets of the outcome over the graph.
///
/// The ascent target of i maximizes the difference quotient
/// `(y[j] - y[i]) / dist(i, j)` over neighbors with strictly larger
/// outcome; coincident points (distance 0) outrank any finite slope and
/// compare by raw outcome difference. Ties break to the lower index.
/// Descent is symmetric.
pub fn steepest_targets(graph: &KnnGraph, y: ArrayView1<'_, f64>) -> Result<GradientFlow> {
    if graph.n() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            got: y.len(),
        });
    }
    let n = graph.n();
    let mut ascent = vec![None; n];
    let mut descent = vec![None; n];
    for i in 0..n {
        let mut best_up: Option<(f64, f64, usize)> = None; // (slope, ydiff, j)
        let mut best_down: Option<(f64, f64, usize)> = None;
        for &(j, d) in graph.neighbors(i) {
            let diff = y[j] - y[i];
            if diff > 0.0 {
                let slope = if d == 0.0 { f64::INFINITY } else { diff / d };
                // Strict improvement keeps the lowest index on ties because
                // neighbor lists are index-sorted.
                if best_up.map_or(true, |(s, dy, _)| slope > s || (slope == s && diff > dy)) {
                    best_up = Some((slope, diff, j));
                }
            } else if diff < 0.0 {
                let slope = if d == 0.0 { f64::INFINITY } else { -diff / d };
                if best_down.map_or(true, |(s, dy, _)| slope > s || (slope == s && -diff > dy)) {
                    best_down = Some((slope, -diff, j));
                }
            }
        }
        ascent[i] = best_up.map(|(_, _, j)| j);
        descent[i] = best_down.map(|(_, _, j)| j);
    }
    Ok(GradientFlow { ascent, descent })
}

/// Follow targets to their terminal point for every point, with path
/// compression. Terminates because each step strictly improves the outcome.
pub(crate) fn terminals(targets: &[Option<usize>]) -> Vec<usize> {
    let n = targets.len();
    let mut terminal = vec![usize::MAX; n];
    let mut path = Vec::new();
    for start in 0..n {
        if terminal[start] != usize::MAX {
            continue;
        }
        path.clear();
        let mut cur = start;
        let end = loop {
            if terminal[cur] != usize::MAX {
                break terminal[cur];
            }
            match targets[cur] {
                None => break cur,
                Some(next) => {
                    path.push(cur);
                    cur = next;
                }
            }
        };
        terminal[cur] = end;
        for &p in &path {
            terminal[p] = end;
        }
    }
    terminal
}

/// Group points into crystals by their (terminal max, terminal min) pair.
///
/// Crystals are ordered by that pair, so the output is deterministic.
pub fn build_crystals(flow: &GradientFlow) -> Vec<Crystal> {
    let max_t = terminals(&flow.ascent);
    let min_t = terminals(&flow.descent);
    let mut groups: std::collections::BTreeMap<(usize, usize), Vec<usize>> =
        std::collections::BTreeMap::new();
    for i in 0..flow.n() {
        groups.entry((max_t[i], min_t[i])).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|((max_point, min_point), members)| Crystal {
            max_point,
            min_point,
            members,
        })
        .collect()
}

/// Route new points to the partition of their nearest training point
/// (Euclidean, ties to the lower training index).
pub fn assign_new(
    partitioning: &Partitioning,
    train_features: ArrayView2<'_, f64>,
    new_features: ArrayView2<'_, f64>,
) -> Result<Vec<usize>> {
    if train_features.ncols() != new_features.ncols() {
        return Err(Error::DimensionMismatch {
            expected: train_features.ncols(),
            got: new_features.ncols(),
        });
    }
    if train_features.nrows() != partitioning.labels.len() {
        return Err(Error::DimensionMismatch {
            expected: partitioning.labels.len(),
            got: train_features.nrows(),
        });
    }
    let labels: Vec<usize> = (0..new_features.nrows())
        .into_par_iter()
        .map(|r| {
            let row = new_features.row(r);
            let mut best = (f64::INFINITY, 0usize);
            for t in 0..train_features.nrows() {
                let d2: f64 = row
                    .iter()
                    .zip(train_features.row(t).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2 < best.0 {
                    best = (d2, t);
                }
            }
            partitioning.labels[best.1]
        })
        .collect();
    Ok(labels)
}

/// Convenience: full pipeline from standardized features and outcome to a
/// chosen partitioning.
pub fn partition_pipeline(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    k: usize,
    policy: &PartitionPolicy,
) -> Result<(KnnGraph, MsHierarchy, Partitioning)> {
    let graph = crate::knn::build_knn(x, k)?;
    let flow = steepest_targets(&graph, y)?;
    let crystals = build_crystals(&flow);
    let hierarchy = build_hierarchy(&crystals, &flow, &graph, y)?;
    let partitioning = partition_at(&hierarchy, x, policy);
    Ok((graph, hierarchy, partitioning))
}

/// Test helper shared by the unit tests and the acceptance suite: a chain
/// graph over 1-D points 0..n with unit spacing and k = 1.
#[cfg(test)]
pub(crate) fn chain_graph(n: usize) -> KnnGraph {
    let x = ndarray::Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
    crate::knn::build_knn(x.view(), 1).unwrap()
}
