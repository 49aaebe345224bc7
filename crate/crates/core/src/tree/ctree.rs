//! Conditional inference tree: splits are gated by a multiplicity-adjusted
//! correlation test, so pure-noise predictors stop the recursion.

use ndarray::{ArrayView1, ArrayView2};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

use super::{best_split_on_feature, mean_of, Node, Tree};

/// Two-sided p-value of the Pearson correlation between feature values and
/// the outcome over `rows`, from the t reference with m - 2 degrees of
/// freedom. Degenerate inputs (constant column or outcome, m < 3) get 1.
fn correlation_p_value(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    rows: &[usize],
    feature: usize,
) -> f64 {
    let m = rows.len();
    if m < 3 {
        return 1.0;
    }
    let xm = rows.iter().map(|&i| x[[i, feature]]).sum::<f64>() / m as f64;
    let ym = mean_of(y, rows);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for &i in rows {
        let dx = x[[i, feature]] - xm;
        let dy = y[i] - ym;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 1.0;
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let df = (m - 2) as f64;
    let t = r.abs() * df.sqrt() / denom.sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    2.0 * (1.0 - dist.cdf(t))
}

/// Grow a conditional inference tree.
///
/// At each node the feature with the smallest Bonferroni-adjusted
/// correlation p-value splits, provided that p-value passes `alpha` and the
/// node still has `2 * min_node` rows; the threshold minimizes
/// child-weighted squared error with both children at least `min_node`.
pub fn fit_ctree(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    alpha: f64,
    min_node: usize,
) -> Result<Tree> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.nrows() < 1 {
        return Err(Error::EmptyData);
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ctree input"));
    }
    let min_node = min_node.max(1);
    let p = x.ncols();

    let mut nodes: Vec<Node> = Vec::new();
    // Worklist of (node slot, rows); children are appended depth-first.
    let all_rows: Vec<usize> = (0..x.nrows()).collect();
    nodes.push(Node::Leaf { value: 0.0, count: 0 });
    let mut stack = vec![(0usize, all_rows)];
    while let Some((slot, rows)) = stack.pop() {
        let split = plan_split(x, y, &rows, alpha, min_node, p);
        match split {
            None => {
                nodes[slot] = Node::Leaf {
                    value: mean_of(y, &rows),
                    count: rows.len(),
                };
            }
            Some((feature, threshold)) => {
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
    Ok(Tree { nodes })
}

fn plan_split(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    rows: &[usize],
    alpha: f64,
    min_node: usize,
    p: usize,
) -> Option<(usize, f64)> {
    if rows.len() < 2 * min_node {
        return None;
    }
    // Bonferroni-adjusted test across candidate features.
    let mut winner: Option<(f64, usize)> = None;
    for j in 0..p {
        let adj = (correlation_p_value(x, y, rows, j) * p as f64).min(1.0);
        let better = match winner {
            None => true,
            Some((bp, _)) => adj < bp,
        };
        if better {
            winner = Some((adj, j));
        }
    }
    let (p_adj, feature) = winner?;
    if p_adj > alpha {
        return None;
    }
    best_split_on_feature(x, y, rows, feature, min_node).map(|(t, _)| (feature, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util;
    use ndarray::{Array1, Array2};
    use rand::Rng;

    #[test]
    fn step_function_splits_near_zero() {
        let mut rng = util::rng_from_seed(1);
        let n = 500;
        let x = Array2::from_shape_fn((n, 3), |_| {
            let v: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            v
        });
        let y = Array1::from_shape_fn(n, |i| if x[[i, 0]] > 0.0 { 1.0 } else { 0.0 });
        let tree = fit_ctree(x.view(), y.view(), 0.05, 5).unwrap();
        match &tree.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert!(threshold.abs() < 0.1, "threshold {threshold}");
            }
            Node::Leaf { .. } => panic!("root did not split"),
        }
    }

    #[test]
    fn tiny_node_is_single_leaf() {
        let x = ndarray::array![[1.0], [2.0], [3.0]];
        let y = ndarray::array![1.0, 2.0, 6.0];
        let tree = fit_ctree(x.view(), y.view(), 0.05, 5).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        match &tree.nodes[0] {
            Node::Leaf { value, count } => {
                assert!((value - 3.0).abs() < 1e-12);
                assert_eq!(*count, 3);
            }
            _ => panic!("expected single leaf"),
        }
    }

    #[test]
    fn pure_noise_rarely_splits() {
        // Smoke version of the calibration criterion: 50 runs should give
        // mostly leaf-only trees at alpha = 0.05.
        let mut splits = 0;
        for seed in 0..50u64 {
            let mut rng = util::rng_from_seed(1000 + seed);
            let x = Array2::from_shape_fn((200, 5), |_| rng.random_range(-1.0_f64..1.0));
            let y = Array1::from_shape_fn(200, |_| rng.random_range(-1.0_f64..1.0));
            let tree = fit_ctree(x.view(), y.view(), 0.05, 5).unwrap();
            if tree.nodes.len() > 1 {
                splits += 1;
            }
        }
        assert!(splits <= 10, "noise split {splits}/50 times");
    }

    #[test]
    fn alpha_domain_checked() {
        let x = ndarray::array![[1.0], [2.0]];
        let y = ndarray::array![1.0, 2.0];
        assert!(fit_ctree(x.view(), y.view(), 0.0, 1).is_err());
        assert!(fit_ctree(x.view(), y.view(), 1.0, 1).is_err());
    }

    #[test]
    fn leaf_means_equal_routed_outcome_means() {
        let mut rng = util::rng_from_seed(3);
        let n = 300;
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0_f64..1.0));
        let y = Array1::from_shape_fn(n, |i| x[[i, 0]].signum() + 0.1 * x[[i, 1]]);
        let tree = fit_ctree(x.view(), y.view(), 0.05, 10).unwrap();
        // Re-route every training point and group by leaf; the leaf value
        // must equal the mean of its routed outcomes.
        let mut sums: std::collections::HashMap<u64, (f64, usize)> = Default::default();
        for i in 0..n {
            let mut idx = 0usize;
            loop {
                match &tree.nodes[idx] {
                    Node::Leaf { .. } => break,
                    Node::Split { feature, threshold, left, right } => {
                        idx = if x[[i, *feature]] <= *threshold { *left } else { *right };
                    }
                }
            }
            let e = sums.entry(idx as u64).or_insert((0.0, 0));
            e.0 += y[i];
            e.1 += 1;
        }
        for (idx, (sum, count)) in sums {
            match &tree.nodes[idx as usize] {
                Node::Leaf { value, count: c } => {
                    assert_eq!(*c, count);
                    assert!((value - sum / count as f64).abs() < 1e-10);
                }
                _ => unreachable!(),
            }
        }
    }
}
