//! Extreme learning machine: one random hidden layer, output weights by
//! minimum-norm least squares through the Moore-Penrose pseudoinverse.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::util;

const SVD_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidParam(format!(
                "unknown activation {other:?} (sigmoid|tanh)"
            ))),
        }
    }
}

/// Fitted ELM. The hidden weights are a pure function of `(seed, p, hidden)`,
/// so serialization stores only the output weights and regenerates the rest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "ElmModelWire", into = "ElmModelWire")]
pub struct ElmModel {
    pub seed: u64,
    pub input_dim: usize,
    pub hidden: usize,
    pub activation: Activation,
    /// Output weights, length `hidden`.
    pub beta: Vec<f64>,
    weights: Array2<f64>,
    biases: Array1<f64>,
}

#[derive(Serialize, Deserialize)]
struct ElmModelWire {
    seed: u64,
    input_dim: usize,
    hidden: usize,
    activation: Activation,
    beta: Vec<f64>,
}

impl From<ElmModelWire> for ElmModel {
    fn from(w: ElmModelWire) -> Self {
        let (weights, biases) = hidden_layer(w.seed, w.input_dim, w.hidden);
        ElmModel {
            seed: w.seed,
            input_dim: w.input_dim,
            hidden: w.hidden,
            activation: w.activation,
            beta: w.beta,
            weights,
            biases,
        }
    }
}

impl From<ElmModel> for ElmModelWire {
    fn from(m: ElmModel) -> Self {
        ElmModelWire {
            seed: m.seed,
            input_dim: m.input_dim,
            hidden: m.hidden,
            activation: m.activation,
            beta: m.beta,
        }
    }
}

/// Input weights and biases drawn i.i.d. uniform on [-1, 1]: weights first,
/// node-major, then the biases.
fn hidden_layer(seed: u64, p: usize, hidden: usize) -> (Array2<f64>, Array1<f64>) {
    let mut rng = util::rng_from_seed(seed);
    let mut weights = Array2::zeros((p, hidden));
    for l in 0..hidden {
        for j in 0..p {
            weights[[j, l]] = rng.random_range(-1.0..=1.0);
        }
    }
    let biases = Array1::from_shape_fn(hidden, |_| rng.random_range(-1.0..=1.0));
    (weights, biases)
}

impl ElmModel {
    /// Hidden activations `g(X W + b)` row by row.
    pub fn hidden_activations(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.ncols(),
            });
        }
        let n = x.nrows();
        let mut h = Array2::zeros((n, self.hidden));
        for i in 0..n {
            for l in 0..self.hidden {
                let z: f64 = x
                    .row(i)
                    .iter()
                    .zip(self.weights.column(l).iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + self.biases[l];
                let g = self.activation.apply(z);
                if !g.is_finite() {
                    return Err(Error::NonFinite("elm activation"));
                }
                h[[i, l]] = g;
            }
        }
        Ok(h)
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let h = self.hidden_activations(x)?;
        Ok(Array1::from_shape_fn(h.nrows(), |i| {
            h.row(i)
                .iter()
                .zip(self.beta.iter())
                .map(|(a, b)| a * b)
                .sum()
        }))
    }
}

/// Default hidden width: `min(200, 2n/3)`, and never below 1.
pub fn default_hidden(n: usize) -> usize {
    (2 * n / 3).clamp(1, 200)
}

/// Fit an ELM: random hidden layer from the seed, output weights by SVD
/// pseudoinverse with singular values below `1e-10 * sigma_max` zeroed.
pub fn fit_elm(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    hidden: usize,
    activation: Activation,
    seed: u64,
) -> Result<ElmModel> {
    if hidden < 1 {
        return Err(Error::InvalidParam("hidden node count must be positive".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("elm input"));
    }
    let (weights, biases) = hidden_layer(seed, x.ncols(), hidden);
    let mut model = ElmModel {
        seed,
        input_dim: x.ncols(),
        hidden,
        activation,
        beta: vec![0.0; hidden],
        weights,
        biases,
    };
    let h = model.hidden_activations(x)?;
    let beta = linalg::lstsq_min_norm(h.view(), y, SVD_RCOND);
    model.beta = beta.to_vec();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn problem(n: usize, p: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
        let mut rng = util::rng_from_seed(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0_f64..1.0));
        let y = Array1::from_shape_fn(n, |i| (x[[i, 0]] * 2.0).sin() + rng.random_range(-0.05..0.05));
        (x, y)
    }

    #[test]
    fn wide_layer_interpolates() {
        // L >= n with full row rank: training residual vanishes.
        let (x, y) = problem(25, 3, 1);
        let m = fit_elm(x.view(), y.view(), 40, Activation::Sigmoid, 7).unwrap();
        let preds = m.predict(x.view()).unwrap();
        let resid: f64 = preds
            .iter()
            .zip(y.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(resid < 1e-6, "training residual {resid}");
    }

    #[test]
    fn zero_outcome_gives_zero_beta() {
        let (x, _) = problem(20, 2, 2);
        let y = Array1::zeros(20);
        let m = fit_elm(x.view(), y.view(), 10, Activation::Sigmoid, 3).unwrap();
        assert!(m.beta.iter().all(|&b| b == 0.0));
        let preds = m.predict(x.view()).unwrap();
        assert!(preds.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn least_squares_optimality_probe() {
        // No random perturbation of beta improves the residual.
        use rand::Rng;
        let (x, y) = problem(100, 5, 3);
        let m = fit_elm(x.view(), y.view(), 20, Activation::Sigmoid, 5).unwrap();
        let h = m.hidden_activations(x.view()).unwrap();
        let sse = |beta: &[f64]| -> f64 {
            (0..100)
                .map(|i| {
                    let pred: f64 = h.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
                    (pred - y[i]) * (pred - y[i])
                })
                .sum()
        };
        let base = sse(&m.beta);
        let mut rng = util::rng_from_seed(11);
        for _ in 0..1000 {
            let perturbed: Vec<f64> = m
                .beta
                .iter()
                .map(|b| b + rng.random_range(-1e-3..1e-3))
                .collect();
            assert!(sse(&perturbed) >= base - 1e-12);
        }
    }

    #[test]
    fn normal_equations_residual_small() {
        let (x, y) = problem(80, 4, 4);
        let m = fit_elm(x.view(), y.view(), 30, Activation::Sigmoid, 9).unwrap();
        let h = m.hidden_activations(x.view()).unwrap();
        let mut hty_norm = 0.0f64;
        let mut ht_res_norm = 0.0f64;
        for l in 0..30 {
            let col = h.column(l);
            let hty: f64 = col.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            let res: f64 = col
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let pred: f64 = h.row(i).iter().zip(m.beta.iter()).map(|(p, q)| p * q).sum();
                    a * (pred - y[i])
                })
                .sum();
            hty_norm += hty * hty;
            ht_res_norm += res * res;
        }
        assert!(ht_res_norm.sqrt() <= 1e-8 * hty_norm.sqrt());
    }

    #[test]
    fn beta_is_minimum_norm() {
        // Wide system: beta must be orthogonal to the null space of H.
        let (x, y) = problem(15, 3, 5);
        let m = fit_elm(x.view(), y.view(), 30, Activation::Sigmoid, 13).unwrap();
        let h = m.hidden_activations(x.view()).unwrap();
        let beta = Array1::from_vec(m.beta.clone());
        let outside = linalg::outside_row_space(h.view(), beta.view(), SVD_RCOND);
        let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(outside <= 1e-8 * norm.max(1.0), "null-space component {outside}");
    }

    #[test]
    fn pseudoinverse_matches_explicit_reconstruction() {
        let (x, y) = problem(12, 2, 6);
        let m = fit_elm(x.view(), y.view(), 6, Activation::Sigmoid, 17).unwrap();
        let h = m.hidden_activations(x.view()).unwrap();
        let hn = linalg::to_nalgebra(h.view());
        let svd = hn.svd(true, true);
        let pinv = svd.pseudo_inverse(1e-10).unwrap();
        let yn = nalgebra::DVector::from_iterator(12, y.iter().copied());
        let beta_ref = pinv * yn;
        for l in 0..6 {
            assert!((m.beta[l] - beta_ref[l]).abs() < 1e-8, "beta {l}");
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let (x, y) = problem(40, 3, 7);
        let a = fit_elm(x.view(), y.view(), 25, Activation::Sigmoid, 23).unwrap();
        let b = fit_elm(x.view(), y.view(), 25, Activation::Sigmoid, 23).unwrap();
        let (xt, _) = problem(10, 3, 8);
        let pa = a.predict(xt.view()).unwrap();
        let pb = b.predict(xt.view()).unwrap();
        assert_eq!(pa, pb);
    }

    #[test]
    fn serialization_round_trips_predictions() {
        let (x, y) = problem(30, 3, 9);
        let m = fit_elm(x.view(), y.view(), 15, Activation::Tanh, 31).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let loaded: ElmModel = serde_json::from_str(&json).unwrap();
        let (xt, _) = problem(8, 3, 10);
        assert_eq!(
            m.predict(xt.view()).unwrap(),
            loaded.predict(xt.view()).unwrap()
        );
    }

    #[test]
    fn column_mismatch_rejected() {
        let (x, y) = problem(10, 3, 11);
        let m = fit_elm(x.view(), y.view(), 5, Activation::Sigmoid, 1).unwrap();
        let bad = Array2::zeros((4, 2));
        assert!(m.predict(bad.view()).is_err());
    }

    #[test]
    fn default_hidden_formula() {
        assert_eq!(default_hidden(10000), 200);
        assert_eq!(default_hidden(150), 100);
        assert_eq!(default_hidden(1), 1);
    }
}
