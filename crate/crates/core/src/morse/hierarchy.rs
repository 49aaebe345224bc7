//! Persistence merge hierarchy over the crystal decomposition.

use std::collections::HashMap;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::KnnGraph;

use super::{terminals, Crystal, GradientFlow};

/// Which kind of extremum a merge event cancelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Max,
    Min,
}

/// One cancellation: `cancelled`'s basin is absorbed by `survivor`'s.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MergeEvent {
    pub persistence: f64,
    pub side: Side,
    pub cancelled: usize,
    pub survivor: usize,
}

/// The simplification hierarchy: base crystals at level 0, one merge per
/// level after that. Partition labelings at any level are derived from the
/// merge list.
#[derive(Debug, Clone)]
pub struct MsHierarchy {
    pub(crate) y: Array1<f64>,
    pub(crate) terminal_max: Vec<usize>,
    pub(crate) terminal_min: Vec<usize>,
    pub merges: Vec<MergeEvent>,
    base_crystal_count: usize,
    base_max_count: usize,
    /// Per side: extremum -> (merge index, survivor).
    merged_max: HashMap<usize, (usize, usize)>,
    merged_min: HashMap<usize, (usize, usize)>,
}

impl MsHierarchy {
    pub fn n(&self) -> usize {
        self.terminal_max.len()
    }

    /// Number of partition levels: level 0 is the base crystals, level
    /// `merges.len()` is the fully simplified complex.
    pub fn n_levels(&self) -> usize {
        self.merges.len() + 1
    }

    pub fn base_crystal_count(&self) -> usize {
        self.base_crystal_count
    }

    /// Count of local maxima whose cancellation persistence is at least
    /// `threshold` (never-cancelled maxima count as infinitely persistent).
    pub fn surviving_maxima_at_persistence(&self, threshold: f64) -> usize {
        let cancelled_below = self
            .merges
            .iter()
            .filter(|m| m.side == Side::Max && m.persistence < threshold)
            .count();
        self.base_max_count - cancelled_below
    }

    /// Representative extremum of `e` after the first `level` merges.
    fn resolve(&self, side: Side, mut e: usize, level: usize, memo: &mut HashMap<usize, usize>) -> usize {
        if let Some(&r) = memo.get(&e) {
            return r;
        }
        let start = e;
        let map = match side {
            Side::Max => &self.merged_max,
            Side::Min => &self.merged_min,
        };
        while let Some(&(idx, survivor)) = map.get(&e) {
            if idx < level {
                e = survivor;
            } else {
                break;
            }
        }
        memo.insert(start, e);
        e
    }

    /// Per-point (max representative, min representative) pair at a level.
    ///
    /// Two points share a crystal at that level iff their pairs are equal.
    pub fn pair_labels_at(&self, level: usize) -> Vec<(usize, usize)> {
        assert!(level < self.n_levels(), "level {level} out of range");
        let mut memo_max = HashMap::new();
        let mut memo_min = HashMap::new();
        (0..self.n())
            .map(|p| {
                (
                    self.resolve(Side::Max, self.terminal_max[p], level, &mut memo_max),
                    self.resolve(Side::Min, self.terminal_min[p], level, &mut memo_min),
                )
            })
            .collect()
    }

    /// Distinct crystal count at a level. Non-increasing in `level`.
    pub fn crystal_count_at(&self, level: usize) -> usize {
        let pairs = self.pair_labels_at(level);
        let mut set: Vec<(usize, usize)> = pairs;
        set.sort_unstable();
        set.dedup();
        set.len()
    }

    /// Smallest crystal size at a level. Non-decreasing in `level`.
    pub fn min_crystal_size_at(&self, level: usize) -> usize {
        let pairs = self.pair_labels_at(level);
        let mut sizes: HashMap<(usize, usize), usize> = HashMap::new();
        for pair in pairs {
            *sizes.entry(pair).or_insert(0) += 1;
        }
        sizes.values().copied().min().unwrap_or(0)
    }

    /// Merge list as a JSON document for external tooling.
    pub fn merge_list_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'a> {
            schema_version: u32,
            base_crystals: usize,
            merges: &'a [MergeEvent],
        }
        serde_json::to_string_pretty(&Export {
            schema_version: 1,
            base_crystals: self.base_crystal_count,
            merges: &self.merges,
        })
        .map_err(Error::from)
    }
}

/// Extremum ordering: for maxima, higher outcome outranks; equal outcomes
/// break to the lower index so plateau extrema still merge deterministically.
fn outranks_max(y: &ArrayView1<'_, f64>, a: usize, b: usize) -> bool {
    y[a] > y[b] || (y[a] == y[b] && a < b)
}

fn outranks_min(y: &ArrayView1<'_, f64>, a: usize, b: usize) -> bool {
    y[a] < y[b] || (y[a] == y[b] && a < b)
}

/// Build the persistence merge hierarchy by iteratively cancelling the
/// extremum with the smallest persistence.
///
/// Persistence of a local max m is `y[m] - s` where `s` is the best (largest)
/// boundary saddle `min(y[i], y[j])` over graph edges joining m's basin to a
/// basin whose max outranks m; minima are dual. The cancelled basin merges
/// into the basin on the other side of that saddle edge. Extrema with no
/// outranking neighbor (one per side per graph component at the end) are
/// never cancelled.
pub fn build_hierarchy(
    crystals: &[Crystal],
    flow: &GradientFlow,
    graph: &KnnGraph,
    y: ArrayView1<'_, f64>,
) -> Result<MsHierarchy> {
    let n = flow.n();
    if graph.n() != n || y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: graph.n().min(y.len()),
        });
    }
    let terminal_max = terminals(&flow.ascent);
    let terminal_min = terminals(&flow.descent);
    let edges: Vec<(usize, usize)> = graph.edges().into_iter().map(|(i, j, _)| (i, j)).collect();

    let base_max_count = {
        let mut m: Vec<usize> = crystals.iter().map(|c| c.max_point).collect();
        m.sort_unstable();
        m.dedup();
        m.len()
    };

    let mut cur_max = terminal_max.clone();
    let mut cur_min = terminal_min.clone();
    let mut merges: Vec<MergeEvent> = Vec::new();
    let mut merged_max: HashMap<usize, (usize, usize)> = HashMap::new();
    let mut merged_min: HashMap<usize, (usize, usize)> = HashMap::new();

    loop {
        // One pass over all edges collects, per active extremum, the best
        // boundary saddle and the basin achieving it.
        let mut best_max: HashMap<usize, (f64, usize)> = HashMap::new();
        let mut best_min: HashMap<usize, (f64, usize)> = HashMap::new();
        for &(i, j) in &edges {
            let (a, b) = (cur_max[i], cur_max[j]);
            if a != b {
                let s = y[i].min(y[j]);
                if outranks_max(&y, b, a) {
                    update_best(&mut best_max, a, s, b, true);
                }
                if outranks_max(&y, a, b) {
                    update_best(&mut best_max, b, s, a, true);
                }
            }
            let (a, b) = (cur_min[i], cur_min[j]);
            if a != b {
                let s = y[i].max(y[j]);
                if outranks_min(&y, b, a) {
                    update_best(&mut best_min, a, s, b, false);
                }
                if outranks_min(&y, a, b) {
                    update_best(&mut best_min, b, s, a, false);
                }
            }
        }

        // Smallest persistence wins; ties break by extremum index, then side.
        let mut chosen: Option<(f64, usize, Side, usize)> = None;
        for (&m, &(s, target)) in &best_max {
            let pers = y[m] - s;
            let cand = (pers, m, Side::Max, target);
            if better_candidate(&chosen, &cand) {
                chosen = Some(cand);
            }
        }
        for (&m, &(s, target)) in &best_min {
            let pers = s - y[m];
            let cand = (pers, m, Side::Min, target);
            if better_candidate(&chosen, &cand) {
                chosen = Some(cand);
            }
        }

        let Some((persistence, cancelled, side, survivor)) = chosen else {
            break;
        };
        debug_assert!(persistence >= 0.0);
        let idx = merges.len();
        match side {
            Side::Max => {
                for rep in cur_max.iter_mut() {
                    if *rep == cancelled {
                        *rep = survivor;
                    }
                }
                merged_max.insert(cancelled, (idx, survivor));
            }
            Side::Min => {
                for rep in cur_min.iter_mut() {
                    if *rep == cancelled {
                        *rep = survivor;
                    }
                }
                merged_min.insert(cancelled, (idx, survivor));
            }
        }
        merges.push(MergeEvent {
            persistence,
            side,
            cancelled,
            survivor,
        });
    }

    Ok(MsHierarchy {
        y: y.to_owned(),
        terminal_max,
        terminal_min,
        merges,
        base_crystal_count: crystals.len(),
        base_max_count,
        merged_max,
        merged_min,
    })
}

fn update_best(map: &mut HashMap<usize, (f64, usize)>, key: usize, s: f64, target: usize, maximize: bool) {
    match map.entry(key) {
        std::collections::hash_map::Entry::Vacant(e) => {
            e.insert((s, target));
        }
        std::collections::hash_map::Entry::Occupied(mut e) => {
            let (cur_s, cur_t) = *e.get();
            let better = if maximize {
                s > cur_s || (s == cur_s && target < cur_t)
            } else {
                s < cur_s || (s == cur_s && target < cur_t)
            };
            if better {
                e.insert((s, target));
            }
        }
    }
}

fn better_candidate(
    current: &Option<(f64, usize, Side, usize)>,
    cand: &(f64, usize, Side, usize),
) -> bool {
    match current {
        None => true,
        Some(cur) => {
            let key = |c: &(f64, usize, Side, usize)| (c.0, c.1, matches!(c.2, Side::Min) as u8);
            key(cand) < key(cur)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse::tests::{two_bump_height, two_bump_sample};
    use crate::morse::{build_crystals, chain_graph, steepest_targets};
    use ndarray::array;

    fn hierarchy_for(y: ndarray::Array1<f64>, n: usize) -> MsHierarchy {
        let graph = chain_graph(n);
        let flow = steepest_targets(&graph, y.view()).unwrap();
        let crystals = build_crystals(&flow);
        build_hierarchy(&crystals, &flow, &graph, y.view()).unwrap()
    }

    #[test]
    fn single_crystal_has_empty_merge_list() {
        let h = hierarchy_for(array![0.0, 1.0, 2.0], 3);
        assert!(h.merges.is_empty());
        assert_eq!(h.n_levels(), 1);
        assert_eq!(h.crystal_count_at(0), 1);
    }

    #[test]
    fn w_chain_hierarchy() {
        // Hand computation on outcome (0,1,0,1,0): both peaks sit at height 1
        // over saddles at 0, so every cancellation has persistence 1; exactly
        // one merge happens on the max side.
        let h = hierarchy_for(array![0.0, 1.0, 0.0, 1.0, 0.0], 5);
        let max_merges: Vec<&MergeEvent> =
            h.merges.iter().filter(|m| m.side == Side::Max).collect();
        assert_eq!(max_merges.len(), 1);
        assert!((max_merges[0].persistence - 1.0).abs() < 1e-12);
        // Full simplification: 4 base crystals down to 1.
        assert_eq!(h.crystal_count_at(0), 4);
        assert_eq!(h.crystal_count_at(h.n_levels() - 1), 1);
    }

    #[test]
    fn merge_persistences_non_decreasing() {
        let mut rng = crate::util::rng_from_seed(77);
        use rand::Rng;
        let x = ndarray::Array2::from_shape_fn((120, 2), |_| rng.random_range(-1.0..1.0));
        let y = ndarray::Array1::from_shape_fn(120, |_| rng.random_range(-1.0..1.0));
        let graph = crate::knn::build_knn(x.view(), 6).unwrap();
        let flow = steepest_targets(&graph, y.view()).unwrap();
        let crystals = build_crystals(&flow);
        let h = build_hierarchy(&crystals, &flow, &graph, y.view()).unwrap();
        assert!(!h.merges.is_empty());
        for w in h.merges.windows(2) {
            assert!(
                w[1].persistence >= w[0].persistence - 1e-12,
                "persistence decreased: {} then {}",
                w[0].persistence,
                w[1].persistence
            );
        }
    }

    #[test]
    fn levels_are_coarsenings() {
        let mut rng = crate::util::rng_from_seed(78);
        use rand::Rng;
        let x = ndarray::Array2::from_shape_fn((100, 2), |_| rng.random_range(-1.0..1.0));
        let y = ndarray::Array1::from_shape_fn(100, |_| rng.random_range(-1.0..1.0));
        let graph = crate::knn::build_knn(x.view(), 5).unwrap();
        let flow = steepest_targets(&graph, y.view()).unwrap();
        let crystals = build_crystals(&flow);
        let h = build_hierarchy(&crystals, &flow, &graph, y.view()).unwrap();
        for level in 0..h.n_levels() - 1 {
            let fine = h.pair_labels_at(level);
            let coarse = h.pair_labels_at(level + 1);
            // Same fine pair implies same coarse pair.
            let mut map: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
            for i in 0..100 {
                if let Some(prev) = map.insert(fine[i], coarse[i]) {
                    assert_eq!(prev, coarse[i], "level {level} not a coarsening");
                }
            }
            assert!(h.crystal_count_at(level + 1) <= h.crystal_count_at(level));
        }
    }

    #[test]
    fn two_bump_persistences_match_analytic_heights() {
        // Bump heights 1.0 and 0.6 over a saddle near 0.1: the shallow mode
        // cancels at persistence ~0.5 and the tall mode survives.
        let (x, y) = two_bump_sample(500, 42);
        let graph = crate::knn::build_knn(x.view(), 15).unwrap();
        let flow = steepest_targets(&graph, y.view()).unwrap();
        let crystals = build_crystals(&flow);
        let h = build_hierarchy(&crystals, &flow, &graph, y.view()).unwrap();
        let last_max_merge = h
            .merges
            .iter()
            .filter(|m| m.side == Side::Max)
            .next_back()
            .expect("at least one max-side merge");
        assert!(
            (last_max_merge.persistence - 0.5).abs() < 0.1,
            "persistence {} not within 0.1 of 0.5",
            last_max_merge.persistence
        );
        // The surviving peak is the tall bump near (-2, 0).
        let surv = last_max_merge.survivor;
        assert!(
            (two_bump_height(x[[surv, 0]], x[[surv, 1]]) - 1.0).abs() < 0.1,
            "survivor is not the tall mode"
        );
        // The cancelled peak is the shallow bump near (2, 0).
        let cancelled = last_max_merge.cancelled;
        assert!((two_bump_height(x[[cancelled, 0]], x[[cancelled, 1]]) - 0.6).abs() < 0.1);
    }

    #[test]
    fn plateau_extrema_cancel_at_zero_persistence() {
        // Equal-height peaks at indices 1 and 3 separated by a valley: the
        // index tie-break lets the higher-indexed peak merge at persistence 1.
        // A flat segment produces zero-persistence merges instead of deadlock.
        let h = hierarchy_for(array![0.0, 1.0, 1.0, 1.0, 0.0], 5);
        assert_eq!(h.crystal_count_at(h.n_levels() - 1), 1);
        assert!(h.merges.iter().any(|m| m.persistence == 0.0));
    }

    #[test]
    fn monotone_affine_transform_preserves_memberships() {
        let mut rng = crate::util::rng_from_seed(79);
        use rand::Rng;
        let x = ndarray::Array2::from_shape_fn((90, 2), |_| rng.random_range(-1.0..1.0));
        let y = ndarray::Array1::from_shape_fn(90, |_| rng.random_range(-1.0..1.0));
        let graph = crate::knn::build_knn(x.view(), 5).unwrap();
        let flow_a = steepest_targets(&graph, y.view()).unwrap();
        let y_t = y.mapv(|v| 3.5 * v + 11.0);
        let flow_b = steepest_targets(&graph, y_t.view()).unwrap();
        assert_eq!(flow_a.ascent, flow_b.ascent);
        assert_eq!(flow_a.descent, flow_b.descent);
        let ca = build_crystals(&flow_a);
        let cb = build_crystals(&flow_b);
        let pairs = |cs: &[Crystal]| -> Vec<(usize, usize, Vec<usize>)> {
            cs.iter()
                .map(|c| (c.max_point, c.min_point, c.members.clone()))
                .collect()
        };
        assert_eq!(pairs(&ca), pairs(&cb));
    }

    #[test]
    fn monotone_transform_on_unit_chain_preserves_memberships() {
        // On a unit-spacing chain the difference quotient reduces to the raw
        // outcome comparison, so any strictly increasing transform preserves
        // gradient targets and hence level-0 memberships.
        let mut rng = crate::util::rng_from_seed(80);
        use rand::Rng;
        let y = ndarray::Array1::from_shape_fn(60, |_| rng.random_range(-2.0..2.0));
        let graph = chain_graph(60);
        let flow_a = steepest_targets(&graph, y.view()).unwrap();
        let y_t = y.mapv(|v: f64| v.exp() + v.powi(3));
        let flow_b = steepest_targets(&graph, y_t.view()).unwrap();
        assert_eq!(flow_a.ascent, flow_b.ascent);
        assert_eq!(flow_a.descent, flow_b.descent);
    }
}
