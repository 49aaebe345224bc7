//! Homotopy (LARS-lasso) solution path.
//!
//! The lasso solution is piecewise linear in the penalty level, so the full
//! path can be traced exactly from `lambda_max` down to zero: the active set
//! changes by one variable at each breakpoint, either an equicorrelation
//! entry or a sign-change exit. Penalty scaling matches the elastic net
//! objective `(1/2n)||y - Xb||^2 + lambda ||b||_1`, so solutions at matched
//! lambda agree with coordinate descent at `alpha = 0`.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::linear::LinearModel;
use crate::util;

/// One point on the path: the solution and active set at `lambda`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub beta: Vec<f64>,
    pub active: Vec<usize>,
}

/// The full piecewise-linear solution path plus the CV-chosen point.
///
/// `breakpoints` hold the event points (strictly decreasing lambda, active
/// set changing by exactly one variable each); `terminal` is the endpoint of
/// the final linear segment (lambda 0 unless the active-set cap stopped the
/// path early).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoPath {
    pub breakpoints: Vec<PathPoint>,
    pub terminal: Option<PathPoint>,
    /// Index into [`LassoPath::path_points`] chosen by cross-validation.
    pub chosen: usize,
    pub feature_names: Vec<String>,
    pub collinearity_warning: bool,
    x_means: Vec<f64>,
    y_mean: f64,
}

impl LassoPath {
    /// Event breakpoints followed by the terminal point.
    pub fn path_points(&self) -> Vec<&PathPoint> {
        self.breakpoints
            .iter()
            .chain(self.terminal.iter())
            .collect()
    }

    /// Piecewise-linear interpolation of the solution at any lambda.
    pub fn beta_at(&self, lambda: f64) -> Array1<f64> {
        let pts = self.path_points();
        let p = self.x_means.len();
        if pts.is_empty() || lambda >= pts[0].lambda {
            return Array1::zeros(p);
        }
        for w in pts.windows(2) {
            let (hi, lo) = (w[0], w[1]);
            if lambda <= hi.lambda && lambda >= lo.lambda {
                let span = hi.lambda - lo.lambda;
                let t = if span > 0.0 { (hi.lambda - lambda) / span } else { 1.0 };
                return Array1::from_shape_fn(p, |j| {
                    hi.beta[j] + t * (lo.beta[j] - hi.beta[j])
                });
            }
        }
        Array1::from_vec(pts.last().unwrap().beta.clone())
    }

    /// The CV-chosen path point as an affine model.
    pub fn chosen_model(&self) -> LinearModel {
        let pts = self.path_points();
        let point = pts[self.chosen.min(pts.len() - 1)];
        let intercept = self.y_mean
            - self
                .x_means
                .iter()
                .zip(point.beta.iter())
                .map(|(m, b)| m * b)
                .sum::<f64>();
        LinearModel {
            intercept,
            coefficients: point.beta.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.chosen_model().predict(x)
    }
}

struct PathState {
    /// Centered predictors and outcome.
    xc: Array2<f64>,
    yc: Array1<f64>,
    /// Gram = Xc^T Xc / n.
    gram: DMatrix<f64>,
    /// Xc^T yc / n.
    xty: Vec<f64>,
    n_cap: usize,
    warning: bool,
}

/// Raw path events (no CV): each entry is (lambda, beta, active-after).
fn trace_path(state: &mut PathState) -> Vec<(f64, Array1<f64>, Vec<usize>)> {
    let p = state.xc.ncols();
    let mut beta = Array1::<f64>::zeros(p);
    let mut active: Vec<usize> = Vec::new();
    let mut events: Vec<(f64, Array1<f64>, Vec<usize>)> = Vec::new();

    // Correlations at beta = 0.
    let corr0: Vec<f64> = state.xty.clone();
    let mut lambda = corr0.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    if lambda == 0.0 {
        return events;
    }
    let first = (0..p)
        .find(|&j| corr0[j].abs() == lambda)
        .expect("max exists");
    active.push(first);
    events.push((lambda, beta.clone(), active.clone()));

    loop {
        if lambda <= 0.0 || active.is_empty() {
            break;
        }
        // Current correlations c_j = x_j^T (yc - Xc beta) / n.
        let corr: Vec<f64> = (0..p)
            .map(|j| {
                state.xty[j]
                    - active
                        .iter()
                        .map(|&a| state.gram[(j, a)] * beta[a])
                        .sum::<f64>()
            })
            .collect();
        let signs = DVector::from_iterator(active.len(), active.iter().map(|&j| corr[j].signum()));

        // Direction d on the active set: G_A d = s_A.
        let g_a = DMatrix::from_fn(active.len(), active.len(), |r, c| {
            state.gram[(active[r], active[c])]
        });
        let d = match linalg::solve_spd(&g_a, &signs) {
            Some(d) => d,
            None => {
                // Exactly collinear active set: drop the later-indexed
                // variable and retry from the event loop.
                state.warning = true;
                let drop_pos = active
                    .iter()
                    .enumerate()
                    .max_by_key(|(_, &j)| j)
                    .map(|(pos, _)| pos)
                    .unwrap();
                let j = active.remove(drop_pos);
                beta[j] = 0.0;
                continue;
            }
        };

        // Inactive correlation slopes g_k = x_k^T X_A d / n.
        let mut best_delta = lambda; // reaching lambda = 0
        let mut event: Option<(bool, usize)> = None; // (is_exit, variable)

        for (pos, &j) in active.iter().enumerate() {
            // Exit when beta_j crosses zero: beta_j + delta * d_j = 0.
            let dj = d[pos];
            if dj != 0.0 {
                let delta = -beta[j] / dj;
                if delta > 1e-14 && delta < best_delta - 1e-14 {
                    best_delta = delta;
                    event = Some((true, j));
                }
            }
        }
        for k in 0..p {
            if active.contains(&k) {
                continue;
            }
            let gk: f64 = active
                .iter()
                .enumerate()
                .map(|(pos, &a)| state.gram[(k, a)] * d[pos])
                .sum();
            // c_k(delta) = corr_k - delta * gk meets +/-(lambda - delta).
            for (target_num, target_den) in [(lambda - corr[k], 1.0 - gk), (lambda + corr[k], 1.0 + gk)] {
                if target_den > 1e-14 {
                    let delta = target_num / target_den;
                    if delta > 1e-14 && delta < best_delta - 1e-14 {
                        best_delta = delta;
                        event = Some((false, k));
                    }
                }
            }
        }

        // Advance the segment.
        for (pos, &j) in active.iter().enumerate() {
            beta[j] += best_delta * d[pos];
        }
        lambda -= best_delta;

        match event {
            None => {
                // Reached lambda = 0: terminal OLS point on the active set.
                events.push((0.0, beta.clone(), active.clone()));
                break;
            }
            Some((true, j)) => {
                beta[j] = 0.0;
                active.retain(|&a| a != j);
                events.push((lambda, beta.clone(), active.clone()));
            }
            Some((false, k)) => {
                active.push(k);
                active.sort_unstable();
                events.push((lambda, beta.clone(), active.clone()));
                if active.len() >= state.n_cap {
                    break;
                }
            }
        }
    }
    events
}

fn build_state(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> PathState {
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
    let xn = linalg::to_nalgebra(xc.view());
    let gram = xn.transpose() * &xn / n as f64;
    let xty: Vec<f64> = (0..p)
        .map(|j| xc.column(j).iter().zip(yc.iter()).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect();
    PathState {
        xc,
        yc,
        gram,
        xty,
        n_cap: (n.saturating_sub(1)).min(p).max(1),
        warning: false,
    }
}

/// Trace the full homotopy path and choose the solution by k-fold CV over
/// the path's lambda grid (ties to the larger lambda). With too few rows for
/// CV the terminal point is chosen.
pub fn fit_lasso_homotopy(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    cv_folds: usize,
    feature_names: &[String],
    seed: u64,
) -> Result<LassoPath> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidParam("homotopy lasso needs n >= 2".into()));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("homotopy lasso input"));
    }
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }

    let mut state = build_state(x, y);
    let x_means: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).sum() / n as f64).collect();
    let y_mean = y.sum() / n as f64;
    let events = trace_path(&mut state);

    let (breakpoints, terminal) = split_events(events);
    let mut path = LassoPath {
        breakpoints,
        terminal,
        chosen: 0,
        feature_names: feature_names.to_vec(),
        collinearity_warning: state.warning,
        x_means,
        y_mean,
    };
    if path.breakpoints.is_empty() {
        // Degenerate outcome with zero correlation everywhere.
        path.terminal = Some(PathPoint {
            lambda: 0.0,
            beta: vec![0.0; x.ncols()],
            active: vec![],
        });
        return Ok(path);
    }

    // CV over the path's own lambda grid.
    let grid: Vec<f64> = path.path_points().iter().map(|pt| pt.lambda).collect();
    let folds = if n >= cv_folds.max(2) {
        cv_folds.max(2)
    } else if n >= 3 {
        3
    } else {
        0
    };
    path.chosen = if folds == 0 {
        grid.len() - 1
    } else {
        let assignment = util::kfold_assignment(n, folds, seed);
        let mut cv_sse = vec![0.0f64; grid.len()];
        for fold in 0..folds {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
            let valid: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
            if train.len() < 2 || valid.is_empty() {
                continue;
            }
            let xt = x.select(Axis(0), &train);
            let yt = Array1::from_iter(train.iter().map(|&i| y[i]));
            let mut fold_state = build_state(xt.view(), yt.view());
            let fold_events = trace_path(&mut fold_state);
            let (bp, term) = split_events(fold_events);
            let fold_path = LassoPath {
                breakpoints: bp,
                terminal: term,
                chosen: 0,
                feature_names: vec![],
                collinearity_warning: fold_state.warning,
                x_means: (0..x.ncols()).map(|j| xt.column(j).sum() / train.len() as f64).collect(),
                y_mean: yt.sum() / train.len() as f64,
            };
            for (g, &lambda) in grid.iter().enumerate() {
                let beta = fold_path.beta_at(lambda);
                let b0 = fold_path.y_mean
                    - fold_path
                        .x_means
                        .iter()
                        .zip(beta.iter())
                        .map(|(m, b)| m * b)
                        .sum::<f64>();
                for &i in &valid {
                    let pred: f64 =
                        b0 + x.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>();
                    let e = y[i] - pred;
                    cv_sse[g] += e * e;
                }
            }
        }
        cv_sse
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(a.0.cmp(&b.0)))
            .map(|(g, _)| g)
            .unwrap_or(grid.len() - 1)
    };
    Ok(path)
}

fn split_events(
    events: Vec<(f64, Array1<f64>, Vec<usize>)>,
) -> (Vec<PathPoint>, Option<PathPoint>) {
    let mut breakpoints = Vec::new();
    let mut terminal = None;
    let count = events.len();
    for (idx, (lambda, beta, active)) in events.into_iter().enumerate() {
        let point = PathPoint {
            lambda,
            beta: beta.to_vec(),
            active,
        };
        let is_terminal = idx + 1 == count && lambda == 0.0 && idx > 0;
        if is_terminal {
            terminal = Some(point);
        } else {
            breakpoints.push(point);
        }
    }
    (breakpoints, terminal)
}

/// KKT residual at a path point: max violation of
/// `|x_j^T r| / n = lambda` (active) and `<= lambda` (inactive).
pub fn kkt_residual(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    point: &PathPoint,
) -> f64 {
    let n = x.nrows();
    let p = x.ncols();
    let x_means: Vec<f64> = (0..p).map(|j| x.column(j).sum() / n as f64).collect();
    let y_mean = y.sum() / n as f64;
    let mut worst = 0.0f64;
    for j in 0..p {
        let mut corr = 0.0;
        for i in 0..n {
            let mut pred = 0.0;
            for (jj, &b) in point.beta.iter().enumerate() {
                pred += (x[[i, jj]] - x_means[jj]) * b;
            }
            corr += (x[[i, j]] - x_means[j]) * ((y[i] - y_mean) - pred);
        }
        corr /= n as f64;
        if point.active.contains(&j) && point.beta[j] != 0.0 {
            worst = worst.max((corr.abs() - point.lambda).abs());
        } else {
            worst = worst.max((corr.abs() - point.lambda).max(0.0));
        }
    }
    worst
}
