//! Level selection policies and the final partition labeling.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg;
use crate::util;

use super::MsHierarchy;

/// How to choose the hierarchy level.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum LevelSelector {
    /// Coarsest level whose crystal count equals the target; nearest
    /// attainable count (with a warning flag) otherwise.
    FixedCount(usize),
    /// Finest level where every raw crystal already has `min_size` members;
    /// falls back to the fully simplified level.
    MinSizeLevel,
    /// Among levels with at most `max_crystals` crystals, minimize the
    /// k-fold cross-validated MSE of a per-partition OLS fit.
    CvOls { max_crystals: usize, folds: usize },
}

/// Partition policy: a level selector plus the minimum partition size
/// enforced afterwards by merging undersized partitions into their
/// persistence-adjacent neighbor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionPolicy {
    pub selector: LevelSelector,
    pub min_size: usize,
    /// Seed for the CV fold assignment of `CvOls`.
    pub seed: u64,
}

impl Default for PartitionPolicy {
    fn default() -> Self {
        PartitionPolicy {
            selector: LevelSelector::CvOls {
                max_crystals: 10,
                folds: 5,
            },
            min_size: 150,
            seed: 0,
        }
    }
}

/// A labeling of all points into partitions 0..m-1 (label 0 is the largest).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Partitioning {
    pub labels: Vec<usize>,
    pub n_partitions: usize,
    pub sizes: Vec<usize>,
    /// Hierarchy level the labeling was derived from.
    pub level: usize,
    /// Set when a `FixedCount` target was unattainable.
    pub count_warning: bool,
    /// CV error of the chosen level under `CvOls`.
    pub cv_mse: Option<f64>,
}

impl Partitioning {
    /// Build from raw labels, relabeling to contiguous ids ordered by
    /// (size desc, first member asc).
    pub(crate) fn from_labels(labels: Vec<usize>, level: usize) -> Partitioning {
        let (labels, sizes) = canonicalize(labels);
        Partitioning {
            n_partitions: sizes.len(),
            labels,
            sizes,
            level,
            count_warning: false,
            cv_mse: None,
        }
    }

    /// Export as CSV `row,partition`.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "row,partition")?;
        for (i, l) in self.labels.iter().enumerate() {
            writeln!(f, "{i},{l}")?;
        }
        Ok(())
    }
}

/// Relabel arbitrary labels to 0..m-1 ordered by (size desc, first member).
fn canonicalize(raw: Vec<usize>) -> (Vec<usize>, Vec<usize>) {
    let mut stats: HashMap<usize, (usize, usize)> = HashMap::new(); // label -> (size, first)
    for (i, &l) in raw.iter().enumerate() {
        let e = stats.entry(l).or_insert((0, i));
        e.0 += 1;
    }
    let mut order: Vec<(usize, (usize, usize))> = stats.into_iter().collect();
    order.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
    let remap: HashMap<usize, usize> = order
        .iter()
        .enumerate()
        .map(|(new, (old, _))| (*old, new))
        .collect();
    let sizes: Vec<usize> = order.iter().map(|(_, (s, _))| *s).collect();
    let labels = raw.into_iter().map(|l| remap[&l]).collect();
    (labels, sizes)
}

/// Select a level per the policy, enforce the minimum partition size, and
/// return the final labeling.
pub fn partition_at(
    hier: &MsHierarchy,
    x: ArrayView2<'_, f64>,
    policy: &PartitionPolicy,
) -> Partitioning {
    let top = hier.n_levels() - 1;
    match policy.selector {
        LevelSelector::FixedCount(target) => {
            let target = target.max(1);
            let (level, warning) = find_count_level(hier, target);
            let labels = enforce_min_size(hier, level, policy.min_size);
            let mut part = Partitioning::from_labels(labels, level);
            part.count_warning = warning || part.n_partitions != target;
            part
        }
        LevelSelector::MinSizeLevel => {
            let level = find_min_size_level(hier, policy.min_size).unwrap_or(top);
            let labels = enforce_min_size(hier, level, policy.min_size);
            Partitioning::from_labels(labels, level)
        }
        LevelSelector::CvOls {
            max_crystals,
            folds,
        } => cv_ols_select(hier, x, max_crystals.max(1), folds.max(2), policy),
    }
}

/// Coarsest level with crystal count equal to `target`, by binary search on
/// the non-increasing count sequence. Returns (level, unattainable flag).
fn find_count_level(hier: &MsHierarchy, target: usize) -> (usize, bool) {
    let top = hier.n_levels() - 1;
    // Largest level with count >= target.
    let mut lo = 0usize;
    let mut hi = top;
    if hier.crystal_count_at(0) < target {
        return (0, true);
    }
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if hier.crystal_count_at(mid) >= target {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let count_at = hier.crystal_count_at(lo);
    if count_at == target {
        (lo, false)
    } else {
        // Unattainable: choose the nearest attainable count.
        let above = count_at; // smallest count >= target
        let below = if lo < top {
            Some(hier.crystal_count_at(lo + 1)) // largest count < target
        } else {
            None
        };
        match below {
            Some(b) if target - b <= above - target => (lo + 1, true),
            _ => (lo, true),
        }
    }
}

/// Finest level where the smallest crystal has at least `min_size` members.
fn find_min_size_level(hier: &MsHierarchy, min_size: usize) -> Option<usize> {
    let top = hier.n_levels() - 1;
    if hier.min_crystal_size_at(top) < min_size {
        return None;
    }
    let mut lo = 0usize;
    let mut hi = top;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if hier.min_crystal_size_at(mid) >= min_size {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

fn cv_ols_select(
    hier: &MsHierarchy,
    x: ArrayView2<'_, f64>,
    max_crystals: usize,
    folds: usize,
    policy: &PartitionPolicy,
) -> Partitioning {
    let top = hier.n_levels() - 1;
    // Candidate levels form a suffix because counts are non-increasing.
    let first = if hier.crystal_count_at(0) <= max_crystals {
        0
    } else {
        let mut lo = 0usize;
        let mut hi = top;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if hier.crystal_count_at(mid) <= max_crystals {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    };
    let first = if hier.crystal_count_at(first) > max_crystals {
        top // even the fully simplified level exceeds the cap
    } else {
        first
    };

    let y = hier.y.view();
    let mut best: Option<(f64, usize, usize, Vec<usize>)> = None; // (cv, m, level, labels)
    let mut prev_labels: Option<Vec<usize>> = None;
    for level in first..=top {
        let labels = enforce_min_size(hier, level, policy.min_size);
        if prev_labels.as_ref() == Some(&labels) {
            continue;
        }
        let cv = cv_ols_mse(x, y, &labels, folds, policy.seed);
        let m = labels.iter().copied().max().unwrap_or(0) + 1;
        let better = match &best {
            None => true,
            Some((bcv, bm, blevel, _)) => {
                (cv, m, std::cmp::Reverse(level)) < (*bcv, *bm, std::cmp::Reverse(*blevel))
            }
        };
        if better {
            best = Some((cv, m, level, labels.clone()));
        }
        prev_labels = Some(labels);
    }
    let (cv, _, level, labels) = best.expect("at least one candidate level");
    let mut part = Partitioning::from_labels(labels, level);
    part.cv_mse = Some(cv);
    part
}

/// K-fold CV error of per-partition OLS fits under a fixed labeling.
fn cv_ols_mse(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    labels: &[usize],
    folds: usize,
    seed: u64,
) -> f64 {
    let n = x.nrows();
    let folds = folds.min(n).max(2);
    let assignment = util::kfold_assignment(n, folds, util::derive_seed(seed, 0xc0f5));
    let m = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut total_se = 0.0;
    let mut total_n = 0usize;
    for fold in 0..folds {
        for part in 0..m {
            let train: Vec<usize> = (0..n)
                .filter(|&i| labels[i] == part && assignment[i] != fold)
                .collect();
            let test: Vec<usize> = (0..n)
                .filter(|&i| labels[i] == part && assignment[i] == fold)
                .collect();
            if test.is_empty() {
                continue;
            }
            let preds: Vec<f64> = if train.len() >= 2 {
                let xt = x.select(ndarray::Axis(0), &train);
                let yt = Array1::from_iter(train.iter().map(|&i| y[i]));
                let (b0, beta) = linalg::ols(xt.view(), yt.view());
                test.iter()
                    .map(|&i| b0 + x.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>())
                    .collect()
            } else if train.len() == 1 {
                vec![y[train[0]]; test.len()]
            } else {
                // No training data for this partition in this fold.
                let fallback = util::mean(
                    &(0..n)
                        .filter(|&i| assignment[i] != fold)
                        .map(|i| y[i])
                        .collect::<Vec<f64>>(),
                );
                vec![fallback; test.len()]
            };
            for (t, &i) in test.iter().enumerate() {
                let e = preds[t] - y[i];
                total_se += e * e;
            }
            total_n += test.len();
        }
    }
    total_se / total_n.max(1) as f64
}

/// Merge partitions below `min_size` into the partition they first join when
/// replaying the merge hierarchy upward; partitions that never connect (small
/// graph components) go to the globally largest partition.
fn enforce_min_size(hier: &MsHierarchy, level: usize, min_size: usize) -> Vec<usize> {
    let pairs = hier.pair_labels_at(level);
    // Initial partitions ordered by pair key.
    let mut pair_ids: Vec<(usize, usize)> = pairs.clone();
    pair_ids.sort_unstable();
    pair_ids.dedup();
    let id_of: HashMap<(usize, usize), usize> = pair_ids
        .iter()
        .enumerate()
        .map(|(idx, pair)| (*pair, idx))
        .collect();
    let mut part: Vec<usize> = pairs.iter().map(|p| id_of[p]).collect();
    let mut alive: Vec<bool> = vec![true; pair_ids.len()];

    loop {
        let mut sizes: HashMap<usize, usize> = HashMap::new();
        for &p in &part {
            *sizes.entry(p).or_insert(0) += 1;
        }
        let n_alive = sizes.len();
        if n_alive <= 1 {
            break;
        }
        // Smallest undersized partition, ties to the lower id.
        let small = sizes
            .iter()
            .filter(|(_, &s)| s < min_size)
            .min_by_key(|(&id, &s)| (s, id))
            .map(|(&id, _)| id);
        let Some(small) = small else { break };

        let target = find_merge_target(hier, level, &part, small, &sizes);
        let target = target.unwrap_or_else(|| {
            // Disconnected leftover: route to the globally largest partition.
            sizes
                .iter()
                .filter(|(&id, _)| id != small)
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&id, _)| id)
                .expect("more than one partition alive")
        });
        for p in part.iter_mut() {
            if *p == small {
                *p = target;
            }
        }
        alive[small] = false;
    }
    part
}

/// First partition that shares a crystal with `small` at any level above
/// `level`, preferring the largest such partition at the earliest level.
fn find_merge_target(
    hier: &MsHierarchy,
    level: usize,
    part: &[usize],
    small: usize,
    sizes: &HashMap<usize, usize>,
) -> Option<usize> {
    let n = hier.n();
    let top = hier.n_levels() - 1;
    for probe in (level + 1)..=top {
        let pairs = hier.pair_labels_at(probe);
        // Crystals containing any point of `small`.
        let mut small_crystals: Vec<(usize, usize)> = (0..n)
            .filter(|&i| part[i] == small)
            .map(|i| pairs[i])
            .collect();
        small_crystals.sort_unstable();
        small_crystals.dedup();
        let mut candidates: Vec<usize> = Vec::new();
        for i in 0..n {
            if part[i] != small && small_crystals.binary_search(&pairs[i]).is_ok() {
                candidates.push(part[i]);
            }
        }
        if !candidates.is_empty() {
            candidates.sort_unstable();
            candidates.dedup();
            return candidates
                .into_iter()
                .max_by(|a, b| sizes[a].cmp(&sizes[b]).then(b.cmp(a)));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse::tests::two_bump_sample;
    use crate::morse::{build_crystals, build_hierarchy, chain_graph, steepest_targets};
    use ndarray::{array, Array2};

    fn two_bump_hierarchy(n: usize, seed: u64) -> (Array2<f64>, ndarray::Array1<f64>, MsHierarchy) {
        let (x, y) = two_bump_sample(n, seed);
        let graph = crate::knn::build_knn(x.view(), 15).unwrap();
        let flow = steepest_targets(&graph, y.view()).unwrap();
        let crystals = build_crystals(&flow);
        let h = build_hierarchy(&crystals, &flow, &graph, y.view()).unwrap();
        (x, y, h)
    }

    #[test]
    fn one_partition_policy_labels_all_zero() {
        let graph = chain_graph(6);
        let y = array![0.0, 1.0, 0.5, 2.0, 0.2, 0.4];
        let flow = steepest_targets(&graph, y.view()).unwrap();
        let crystals = build_crystals(&flow);
        let h = build_hierarchy(&crystals, &flow, &graph, y.view()).unwrap();
        let x = Array2::zeros((6, 1));
        let policy = PartitionPolicy {
            selector: LevelSelector::FixedCount(1),
            min_size: 1,
            seed: 0,
        };
        let part = partition_at(&h, x.view(), &policy);
        assert_eq!(part.n_partitions, 1);
        assert!(part.labels.iter().all(|&l| l == 0));
        assert!(!part.count_warning);
    }

    #[test]
    fn two_bump_two_partitions_recover_membership() {
        let (x, _, h) = two_bump_hierarchy(500, 42);
        let policy = PartitionPolicy {
            selector: LevelSelector::FixedCount(2),
            min_size: 25,
            seed: 0,
        };
        let part = partition_at(&h, x.view(), &policy);
        assert_eq!(part.n_partitions, 2);
        // Ground truth: nearer mode center. Modes sit at (-2, 0) and (2, 0).
        let truth: Vec<usize> = (0..500).map(|i| usize::from(x[[i, 0]] > 0.0)).collect();
        let agree = best_label_agreement(&part.labels, &truth);
        assert!(
            agree * 100 >= 95 * 500,
            "membership agreement {agree}/500 below 95%"
        );
    }

    /// Agreement under the better of the two label-to-truth mappings.
    pub(crate) fn best_label_agreement(labels: &[usize], truth: &[usize]) -> usize {
        let direct = labels
            .iter()
            .zip(truth.iter())
            .filter(|(l, t)| l == t)
            .count();
        direct.max(labels.len() - direct)
    }

    #[test]
    fn min_size_enforced_on_noisy_outcome() {
        use rand::Rng;
        let mut rng = crate::util::rng_from_seed(51);
        let x = Array2::from_shape_fn((400, 3), |_| rng.random_range(-1.0..1.0));
        let y = ndarray::Array1::from_shape_fn(400, |_| rng.random_range(-1.0..1.0));
        let graph = crate::knn::build_knn(x.view(), 10).unwrap();
        let flow = steepest_targets(&graph, y.view()).unwrap();
        let crystals = build_crystals(&flow);
        let h = build_hierarchy(&crystals, &flow, &graph, y.view()).unwrap();
        let policy = PartitionPolicy {
            selector: LevelSelector::CvOls {
                max_crystals: 10,
                folds: 5,
            },
            min_size: 60,
            seed: 9,
        };
        let part = partition_at(&h, x.view(), &policy);
        assert!(part.sizes.iter().all(|&s| s >= 60), "sizes {:?}", part.sizes);
        assert_eq!(part.sizes.iter().sum::<usize>(), 400);
        assert!(part.cv_mse.is_some());
    }

    #[test]
    fn unattainable_count_sets_warning() {
        // A monotone chain has exactly one crystal at every level.
        let graph = chain_graph(4);
        let y = array![0.0, 1.0, 2.0, 3.0];
        let flow = steepest_targets(&graph, y.view()).unwrap();
        let crystals = build_crystals(&flow);
        let h = build_hierarchy(&crystals, &flow, &graph, y.view()).unwrap();
        let x = Array2::zeros((4, 1));
        let policy = PartitionPolicy {
            selector: LevelSelector::FixedCount(3),
            min_size: 1,
            seed: 0,
        };
        let part = partition_at(&h, x.view(), &policy);
        assert!(part.count_warning);
        assert_eq!(part.n_partitions, 1);
    }

    #[test]
    fn partition_sizes_sum_to_n() {
        let (x, _, h) = two_bump_hierarchy(300, 7);
        for selector in [
            LevelSelector::FixedCount(2),
            LevelSelector::MinSizeLevel,
            LevelSelector::CvOls {
                max_crystals: 10,
                folds: 5,
            },
        ] {
            let policy = PartitionPolicy {
                selector,
                min_size: 20,
                seed: 3,
            };
            let part = partition_at(&h, x.view(), &policy);
            assert_eq!(part.sizes.iter().sum::<usize>(), 300);
            assert_eq!(part.labels.len(), 300);
            assert_eq!(
                part.n_partitions,
                part.labels.iter().copied().max().unwrap() + 1
            );
        }
    }

    #[test]
    fn labels_deterministic() {
        let (x, _, h) = two_bump_hierarchy(300, 7);
        let policy = PartitionPolicy::default();
        let a = partition_at(&h, x.view(), &policy);
        let b = partition_at(&h, x.view(), &policy);
        assert_eq!(a.labels, b.labels);
    }
}
