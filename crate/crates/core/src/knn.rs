//! Symmetric k-nearest-neighbor graph over standardized feature space.

use std::io::Write;
use std::path::Path;

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Undirected KNN graph with per-edge Euclidean distances.
///
/// Built by taking each point's k nearest neighbors and symmetrizing by
/// edge union, so degrees can exceed k. Neighbor lists are sorted by index.
#[derive(Debug, Clone)]
pub struct KnnGraph {
    pub k: usize,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl KnnGraph {
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    /// Undirected edge list with i < j.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            for &(j, d) in nbrs {
                if i < j {
                    out.push((i, j, d));
                }
            }
        }
        out
    }

    /// Connected components; returns a component id per point.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0usize;
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for &(j, _) in &self.neighbors[i] {
                    if comp[j] == usize::MAX {
                        comp[j] = next;
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    /// Debug dump of the edge list as CSV `i,j,distance`.
    pub fn write_edges_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "i,j,distance")?;
        for (i, j, d) in self.edges() {
            writeln!(f, "{i},{j},{d}")?;
        }
        Ok(())
    }
}

/// Default neighborhood size: `max(15, ceil(log2(n)) * 3)`, large enough to
/// keep the graph connected at the sample sizes used here.
pub fn default_k(n: usize) -> usize {
    let log2 = (n.max(2) as f64).log2().ceil() as usize;
    15.max(log2 * 3).min(n.saturating_sub(1).max(1))
}

/// Build the symmetrized KNN graph by brute-force distance computation.
///
/// Each point's `k` smallest Euclidean distances (ties broken by lower
/// index) define its out-neighbors; the undirected graph is their union.
pub fn build_knn(x: ArrayView2<'_, f64>, k: usize) -> Result<KnnGraph> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidParam("need at least 2 points".into()));
    }
    if k < 1 || k > n - 1 {
        return Err(Error::InvalidParam(format!(
            "k must be in 1..={}, got {k}",
            n - 1
        )));
    }

    let out_neighbors: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let mut dists: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d2: f64 = xi
                        .iter()
                        .zip(x.row(j).iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (j, d2.sqrt())
                })
                .collect();
            dists.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            dists.truncate(k);
            dists
        })
        .collect();

    // Symmetrize by edge union.
    let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, nbrs) in out_neighbors.iter().enumerate() {
        for &(j, d) in nbrs {
            neighbors[i].push((j, d));
            neighbors[j].push((i, d));
        }
    }
    for list in neighbors.iter_mut() {
        list.sort_by(|a, b| a.0.cmp(&b.0));
        list.dedup_by(|a, b| a.0 == b.0);
    }
    Ok(KnnGraph { k, neighbors })
}
