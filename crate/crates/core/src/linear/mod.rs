//! Penalized and boosted linear regressors.

mod boosting;
mod elastic_net;
mod homotopy;

pub use boosting::{fit_boosted_linear, BoostedModel};
pub use elastic_net::{fit_elastic_net, LambdaPolicy};
pub use homotopy::{fit_lasso_homotopy, LassoPath, PathPoint};

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An affine model: `y_hat = intercept + x . coefficients`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl LinearModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                got: x.ncols(),
            });
        }
        Ok(Array1::from_shape_fn(x.nrows(), |i| {
            self.intercept
                + x.row(i)
                    .iter()
                    .zip(self.coefficients.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        }))
    }

    /// Nonzero coefficients as (name, value) pairs, in feature order.
    pub fn sparse_coefficients(&self) -> Vec<(String, f64)> {
        self.feature_names
            .iter()
            .zip(self.coefficients.iter())
            .filter(|(_, &c)| c != 0.0)
            .map(|(n, &c)| (n.clone(), c))
            .collect()
    }
}
