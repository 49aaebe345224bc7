//! Elastic net by cyclic coordinate descent with soft-thresholding.
//!
//! The objective is
//!
//! ```text
//! (1/2n) ||y - X b||^2 + lambda * (alpha ||b||^2 + (1 - alpha) ||b||_1)
//! ```
//!
//! Note the penalty mix: `alpha` weights the ridge term and `1 - alpha` the
//! lasso term, so `alpha = 0` is the pure L1 problem.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::LinearModel;
use crate::util;

const COORD_TOL: f64 = 1e-7;
const MAX_SWEEPS: usize = 100_000;
const GRID_LEN: usize = 100;
const GRID_DECADES: f64 = 4.0;

/// Penalty-level selection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub enum LambdaPolicy {
    /// K-fold CV over a log grid of 100 values spanning four decades below
    /// lambda_max. Falls back to 3 folds when n is below the fold count, and to
    /// a fixed lambda when n < 3.
    Cv { folds: usize },
    Fixed(f64),
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Cv { folds: 10 }
    }
}

pub(crate) struct Centered {
    xc: Array2<f64>,
    yc: Array1<f64>,
    x_means: Vec<f64>,
    y_mean: f64,
    /// Per-column x_j^T x_j / n of the centered matrix.
    col_ss: Vec<f64>,
}

fn center(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Centered {
    let n = x.nrows();
    let p = x.ncols();
    let x_means: Vec<f64> = (0..p).map(|j| x.column(j).sum() / n as f64).collect();
    let y_mean = y.sum() / n as f64;
    let mut xc = x.to_owned();
    for j in 0..p {
        for i in 0..n {
            xc[[i, j]] -= x_means[j];
        }
    }
    let yc = Array1::from_iter(y.iter().map(|v| v - y_mean));
    let col_ss = (0..p)
        .map(|j| xc.column(j).iter().map(|v| v * v).sum::<f64>() / n as f64)
        .collect();
    Centered {
        xc,
        yc,
        x_means,
        y_mean,
        col_ss,
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// One full fit at fixed lambda, warm-started from `beta`. Returns the sweep
/// count used. Residual `r = yc - Xc beta` is maintained incrementally.
pub(crate) fn coordinate_descent(
    c: &Centered,
    lambda: f64,
    alpha: f64,
    beta: &mut Array1<f64>,
    r: &mut Array1<f64>,
) -> usize {
    let n = c.xc.nrows();
    let p = c.xc.ncols();
    let l1 = lambda * (1.0 - alpha);
    let l2 = lambda * alpha;
    for sweep in 0..MAX_SWEEPS {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if c.col_ss[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let xj = c.xc.column(j);
            let corr = xj.iter().zip(r.iter()).map(|(a, b)| a * b).sum::<f64>() / n as f64
                + c.col_ss[j] * old;
            let new = soft_threshold(corr, l1) / (c.col_ss[j] + 2.0 * l2);
            if new != old {
                let delta = new - old;
                for i in 0..n {
                    r[i] -= delta * xj[i];
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < COORD_TOL {
            return sweep + 1;
        }
    }
    MAX_SWEEPS
}

pub(crate) fn objective(c: &Centered, lambda: f64, alpha: f64, beta: &Array1<f64>) -> f64 {
    let n = c.xc.nrows();
    let mut rss = 0.0;
    for i in 0..n {
        let pred: f64 = c.xc.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        let e = c.yc[i] - pred;
        rss += e * e;
    }
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    rss / (2.0 * n as f64) + lambda * (alpha * l2 + (1.0 - alpha) * l1)
}

/// Largest penalty with an all-zero solution (the soft-threshold kill level).
fn lambda_max(c: &Centered, alpha: f64) -> f64 {
    let n = c.xc.nrows();
    let p = c.xc.ncols();
    let max_corr = (0..p)
        .map(|j| {
            c.xc.column(j)
                .iter()
                .zip(c.yc.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .abs()
                / n as f64
        })
        .fold(0.0f64, f64::max);
    max_corr / (1.0 - alpha).max(1e-3)
}

fn lambda_grid(lmax: f64) -> Vec<f64> {
    (0..GRID_LEN)
        .map(|t| lmax * 10f64.powf(-GRID_DECADES * t as f64 / (GRID_LEN - 1) as f64))
        .collect()
}

/// Fit the elastic net, selecting lambda by CV unless fixed by the caller.
///
/// `seed` drives the CV fold assignment only; the solver itself is
/// deterministic.
pub fn fit_elastic_net(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    alpha: f64,
    lambda_policy: LambdaPolicy,
    feature_names: &[String],
    seed: u64,
) -> Result<LinearModel> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParam(format!("alpha must be in [0, 1], got {alpha}")));
    }
    if x.nrows() < 2 {
        return Err(Error::InvalidParam("elastic net needs n >= 2".into()));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("elastic net input"));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }

    let c = center(x, y);
    let n = x.nrows();
    let p = x.ncols();

    let lambda = match lambda_policy {
        LambdaPolicy::Fixed(l) => l,
        LambdaPolicy::Cv { folds } => {
            let lmax = lambda_max(&c, alpha);
            let folds = if n >= folds.max(2) {
                folds.max(2)
            } else if n >= 3 {
                3
            } else {
                0 // fixed-lambda fallback below
            };
            if folds == 0 || lmax == 0.0 {
                lmax * 0.01
            } else {
                cv_lambda(&c, alpha, lmax, folds, seed)
            }
        }
    };

    let mut beta = Array1::zeros(p);
    let mut r = c.yc.clone();
    if matches!(lambda_policy, LambdaPolicy::Cv { .. }) {
        // Warm-started path from lambda_max down to the chosen value.
        for &l in lambda_grid(lambda_max(&c, alpha)).iter().filter(|&&l| l >= lambda) {
            coordinate_descent(&c, l, alpha, &mut beta, &mut r);
        }
    }
    coordinate_descent(&c, lambda, alpha, &mut beta, &mut r);

    let intercept =
        c.y_mean - c.x_means.iter().zip(beta.iter()).map(|(m, b)| m * b).sum::<f64>();
    Ok(LinearModel {
        intercept,
        coefficients: beta.to_vec(),
        feature_names: feature_names.to_vec(),
    })
}

/// Mean CV error over the lambda grid; ties go to the larger lambda.
fn cv_lambda(c: &Centered, alpha: f64, lmax: f64, folds: usize, seed: u64) -> f64 {
    let n = c.xc.nrows();
    let grid = lambda_grid(lmax);
    let assignment = util::kfold_assignment(n, folds, seed);
    let mut cv_sse = vec![0.0f64; grid.len()];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
        let valid: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
        if train.len() < 2 || valid.is_empty() {
            continue;
        }
        let xt = c.xc.select(Axis(0), &train);
        let yt = Array1::from_iter(train.iter().map(|&i| c.yc[i]));
        let cf = center(xt.view(), yt.view());
        let mut beta = Array1::zeros(c.xc.ncols());
        let mut r = cf.yc.clone();
        for (g, &lambda) in grid.iter().enumerate() {
            coordinate_descent(&cf, lambda, alpha, &mut beta, &mut r);
            let b0 = cf.y_mean
                - cf.x_means.iter().zip(beta.iter()).map(|(m, b)| m * b).sum::<f64>();
            for &i in &valid {
                let pred: f64 = b0
                    + c.xc.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>();
                let e = c.yc[i] - pred;
                cv_sse[g] += e * e;
            }
        }
    }
    let best = cv_sse
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(a.0.cmp(&b.0)))
        .map(|(g, _)| g)
        .unwrap_or(0);
    grid[best]
}
