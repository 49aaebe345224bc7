//! Dense linear-algebra helpers shared by the learners.
//!
//! Matrices move through the crate as `ndarray` arrays; this module owns the
//! conversion to `nalgebra` for factorizations (SVD, Cholesky).

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub fn to_nalgebra(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_row_iterator(a.nrows(), a.ncols(), a.iter().copied())
}

/// Minimum-norm least-squares solution of `a x = b` via SVD.
///
/// Singular values below `rcond * sigma_max` are treated as zero, so the
/// returned vector is the Moore-Penrose solution at that cutoff.
pub fn lstsq_min_norm(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>, rcond: f64) -> Array1<f64> {
    let m = to_nalgebra(a);
    let rhs = DVector::from_iterator(b.len(), b.iter().copied());
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("svd requested u");
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = rcond * smax;
    let ut_b = u.transpose() * rhs;
    let mut scaled = DVector::zeros(svd.singular_values.len());
    for i in 0..svd.singular_values.len() {
        let s = svd.singular_values[i];
        if s > cutoff {
            scaled[i] = ut_b[i] / s;
        }
    }
    let x = v_t.transpose() * scaled;
    Array1::from_iter(x.iter().copied())
}

/// Norm of the component of `x` lying outside the row space of `a`.
///
/// Zero (up to numerics) iff `x` is orthogonal to the null space of `a`,
/// which is the defining property of the minimum-norm least-squares solution.
pub fn outside_row_space(a: ArrayView2<'_, f64>, x: ArrayView1<'_, f64>, rcond: f64) -> f64 {
    let m = to_nalgebra(a);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = rcond * smax;
    let xv = DVector::from_iterator(x.len(), x.iter().copied());
    let mut proj = DVector::zeros(x.len());
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] > cutoff {
            let row = v_t.row(i).transpose();
            let coef = row.dot(&xv);
            proj += row * coef;
        }
    }
    (xv - proj).norm()
}

/// Solve the symmetric positive-definite system `g x = b` by Cholesky.
///
/// Returns `None` when `g` is not numerically positive definite.
pub fn solve_spd(g: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    g.clone().cholesky().map(|ch| ch.solve(b))
}

/// Ordinary least squares with intercept: returns (intercept, coefficients).
///
/// Uses the pseudoinverse, so collinear or underdetermined inputs get the
/// minimum-norm fit instead of failing.
pub fn ols(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> (f64, Array1<f64>) {
    let n = x.nrows();
    let p = x.ncols();
    if n == 0 {
        return (f64::NAN, Array1::zeros(p));
    }
    let y_mean = y.sum() / n as f64;
    if n == 1 {
        return (y_mean, Array1::zeros(p));
    }
    let col_means: Vec<f64> = (0..p).map(|j| x.column(j).sum() / n as f64).collect();
    let mut xc = x.to_owned();
    for j in 0..p {
        for i in 0..n {
            xc[[i, j]] -= col_means[j];
        }
    }
    let yc = Array1::from_iter(y.iter().map(|v| v - y_mean));
    let beta = lstsq_min_norm(xc.view(), yc.view(), 1e-10);
    let intercept = y_mean - col_means.iter().zip(beta.iter()).map(|(m, b)| m * b).sum::<f64>();
    (intercept, beta)
}

/// Project rows of `x` onto the top two principal axes of its centered columns.
///
/// Axis signs are fixed so the largest-magnitude loading is positive, which
/// keeps exports reproducible.
pub fn project_pca2(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let p = x.ncols();
    let mut centered = x.to_owned();
    for j in 0..p {
        let m = x.column(j).sum() / n as f64;
        for i in 0..n {
            centered[[i, j]] -= m;
        }
    }
    let m = to_nalgebra(centered.view());
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut out = Array2::zeros((n, 2));
    for axis in 0..2usize.min(v_t.nrows()) {
        let mut v: Vec<f64> = v_t.row(axis).iter().copied().collect();
        let lead = v
            .iter()
            .cloned()
            .fold(0.0f64, |acc, c| if c.abs() > acc.abs() { c } else { acc });
        if lead < 0.0 {
            for c in v.iter_mut() {
                *c = -*c;
            }
        }
        for i in 0..n {
            out[[i, axis]] = (0..p).map(|j| centered[[i, j]] * v[j]).sum();
        }
    }
    out
}
