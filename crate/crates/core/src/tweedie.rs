//! Simulated regression datasets with Tweedie-distributed outcomes.
//!
//! The variance function is `Var(Y) = phi * mu^xi`: xi = 1 is (scaled)
//! Poisson, xi = 2 is gamma, and 1 < xi < 2 is compound Poisson-gamma with
//! a point mass at zero.

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::util;

/// Predictor-to-outcome mean structure on the log scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relationship {
    Linear,
    Nonlinear,
    Mixed,
}

impl Relationship {
    pub fn name(&self) -> &'static str {
        match self {
            Relationship::Linear => "linear",
            Relationship::Nonlinear => "nonlinear",
            Relationship::Mixed => "mixed",
        }
    }

    /// Formula recorded in config sidecars so outputs are self-describing.
    pub fn formula(&self) -> &'static str {
        match self {
            Relationship::Linear => "eta = 0.5*x1 + 0.4*x2 + 0.3*x3 + 0.2*x4; mu = exp(eta)",
            Relationship::Nonlinear => {
                "eta = 0.5*sin(pi*x1) + 0.4*x2^2/2 + 0.3*x3*x4 + 0.2*|x4|; mu = exp(eta)"
            }
            Relationship::Mixed => {
                "eta = 0.5*x1 + 0.4*x2 + 0.3*sin(pi*x3) + 0.2*x3*x4; mu = exp(eta)"
            }
        }
    }
}

impl std::str::FromStr for Relationship {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Relationship::Linear),
            "nonlinear" => Ok(Relationship::Nonlinear),
            "mixed" => Ok(Relationship::Mixed),
            other => Err(Error::InvalidParam(format!(
                "unknown relationship {other:?} (linear|nonlinear|mixed)"
            ))),
        }
    }
}

/// One simulation grid cell: Tweedie parameters, mean structure, and size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Tweedie parameter in [1, 2].
    pub xi: f64,
    /// Dispersion, strictly positive.
    pub phi: f64,
    pub relationship: Relationship,
    pub n: usize,
    pub p_true: usize,
    pub p_noise: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(xi: f64, phi: f64, relationship: Relationship, n: usize, seed: u64) -> Result<Self> {
        let cfg = SimConfig {
            xi,
            phi,
            relationship,
            n,
            p_true: 4,
            p_noise: 11,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.xi) {
            return Err(Error::InvalidParam(format!(
                "xi must be in [1, 2], got {}",
                self.xi
            )));
        }
        if !(self.phi > 0.0) {
            return Err(Error::InvalidParam(format!(
                "phi must be positive, got {}",
                self.phi
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParam("n must be positive".into()));
        }
        if self.p_true < 4 {
            return Err(Error::InvalidParam("need at least 4 true predictors".into()));
        }
        Ok(())
    }

    pub fn p_total(&self) -> usize {
        self.p_true + self.p_noise
    }

    /// Short cell identifier used in report keys, e.g. `linear_xi1.5_phi2`.
    pub fn cell_id(&self) -> String {
        format!("{}_xi{}_phi{}", self.relationship.name(), self.xi, self.phi)
    }
}

/// i.i.d. standard normal predictor matrix; columns 0..p_true-1 carry signal.
pub fn make_predictors(config: &SimConfig, rng: &mut ChaCha20Rng) -> Array2<f64> {
    Array2::from_shape_fn((config.n, config.p_total()), |_| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    })
}

const MU_MIN: f64 = 1e-3;
const MU_MAX: f64 = 1e3;

/// Positive mean vector mu = exp(eta) for the chosen relationship, with eta
/// built from the first four columns and clipped to [1e-3, 1e3].
pub fn mean_function(x: &Array2<f64>, relationship: Relationship) -> Result<Array1<f64>> {
    if x.ncols() < 4 {
        return Err(Error::InvalidParam(format!(
            "mean_function needs at least 4 columns, got {}",
            x.ncols()
        )));
    }
    let pi = std::f64::consts::PI;
    let mu = Array1::from_shape_fn(x.nrows(), |i| {
        let (x1, x2, x3, x4) = (x[[i, 0]], x[[i, 1]], x[[i, 2]], x[[i, 3]]);
        let eta = match relationship {
            Relationship::Linear => 0.5 * x1 + 0.4 * x2 + 0.3 * x3 + 0.2 * x4,
            Relationship::Nonlinear => {
                0.5 * (pi * x1).sin() + 0.4 * x2 * x2 / 2.0 + 0.3 * x3 * x4 + 0.2 * x4.abs()
            }
            Relationship::Mixed => 0.5 * x1 + 0.4 * x2 + 0.3 * (pi * x3).sin() + 0.2 * x3 * x4,
        };
        eta.exp().clamp(MU_MIN, MU_MAX)
    });
    Ok(mu)
}

/// Draw one Tweedie variate with mean `mu` and variance `phi * mu^xi`.
///
/// xi = 1 uses the exact scale family `phi * Poisson(mu/phi)`; xi = 2 is
/// `Gamma(1/phi, phi*mu)`; 1 < xi < 2 is compound Poisson-gamma via the
/// standard reparameterization: `N ~ Poisson(lambda)` with
/// `lambda = mu^(2-xi) / (phi (2-xi))`, and given `N > 0` the sum of N
/// i.i.d. `Gamma((2-xi)/(xi-1), phi (xi-1) mu^(xi-1))` terms, drawn as a
/// single gamma with N-fold shape.
pub fn sample_tweedie(mu: f64, phi: f64, xi: f64, rng: &mut ChaCha20Rng) -> Result<f64> {
    if !(mu > 0.0) || !(phi > 0.0) || !(1.0..=2.0).contains(&xi) {
        return Err(Error::InvalidParam(format!(
            "sample_tweedie needs mu > 0, phi > 0, xi in [1, 2]; got mu={mu}, phi={phi}, xi={xi}"
        )));
    }
    if xi == 1.0 {
        let pois = Poisson::new(mu / phi)
            .map_err(|e| Error::InvalidParam(format!("poisson({}): {e}", mu / phi)))?;
        let n: f64 = pois.sample(rng);
        Ok(phi * n)
    } else if xi == 2.0 {
        let gamma = Gamma::new(1.0 / phi, phi * mu)
            .map_err(|e| Error::InvalidParam(format!("gamma: {e}")))?;
        Ok(gamma.sample(rng))
    } else {
        let lambda = mu.powf(2.0 - xi) / (phi * (2.0 - xi));
        let pois = Poisson::new(lambda)
            .map_err(|e| Error::InvalidParam(format!("poisson({lambda}): {e}")))?;
        let n: f64 = pois.sample(rng);
        if n == 0.0 {
            return Ok(0.0);
        }
        let shape = (2.0 - xi) / (xi - 1.0);
        let scale = phi * (xi - 1.0) * mu.powf(xi - 1.0);
        let gamma = Gamma::new(n * shape, scale)
            .map_err(|e| Error::InvalidParam(format!("gamma: {e}")))?;
        Ok(gamma.sample(rng))
    }
}

/// Generate the full simulated dataset: predictors, means, sampled outcome.
///
/// Feature names are `x1..x15` (signal first), outcome is `y`. The same
/// config (including seed) always produces the identical dataset.
pub fn simulate_dataset(config: &SimConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = util::rng_from_seed(config.seed);
    let features = make_predictors(config, &mut rng);
    let mu = mean_function(&features, config.relationship)?;
    let mut outcome = Array1::zeros(config.n);
    for i in 0..config.n {
        outcome[i] = sample_tweedie(mu[i], config.phi, config.xi, &mut rng)?;
    }
    let names = (1..=config.p_total()).map(|j| format!("x{j}")).collect();
    Dataset::new(features, outcome, names, "y".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draws(mu: f64, phi: f64, xi: f64, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = util::rng_from_seed(seed);
        (0..count)
            .map(|_| sample_tweedie(mu, phi, xi, &mut rng).unwrap())
            .collect()
    }

    #[test]
    fn predictor_matrix_moments() {
        let cfg = SimConfig::new(2.0, 1.0, Relationship::Linear, 10000, 7).unwrap();
        let mut rng = util::rng_from_seed(cfg.seed);
        let x = make_predictors(&cfg, &mut rng);
        assert_eq!(x.dim(), (10000, 15));
        for j in 0..15 {
            let col: Vec<f64> = x.column(j).to_vec();
            assert!(util::mean(&col).abs() < 0.05, "column {j} mean");
            let sd = util::variance(&col).sqrt();
            assert!((0.97..1.03).contains(&sd), "column {j} sd {sd}");
        }
    }

    #[test]
    fn predictors_deterministic_under_seed() {
        let cfg = SimConfig::new(1.5, 2.0, Relationship::Mixed, 200, 3).unwrap();
        let a = make_predictors(&cfg, &mut util::rng_from_seed(cfg.seed));
        let b = make_predictors(&cfg, &mut util::rng_from_seed(cfg.seed));
        assert_eq!(a, b);
    }

    #[test]
    fn mean_function_point_values() {
        let mut x = Array2::zeros((2, 4));
        let mu = mean_function(&x, Relationship::Linear).unwrap();
        assert!((mu[0] - 1.0).abs() < 1e-15, "all-zero row gives e^0 = 1");
        x[[0, 0]] = 2.0;
        let mu = mean_function(&x, Relationship::Linear).unwrap();
        assert!((mu[0] - 1.0f64.exp()).abs() < 1e-12, "x1=2 alone gives e^1");
    }

    #[test]
    fn nonlinear_mean_matches_reevaluation() {
        // Oracle: independent evaluation of the stated formula at hand-picked
        // points.
        let pts = [
            [0.5, -1.0, 2.0, 0.3],
            [-0.2, 0.0, 1.0, -1.5],
            [1.0, 1.0, 1.0, 1.0],
            [0.0, 2.0, -2.0, 0.0],
            [-1.3, 0.7, 0.1, 2.2],
        ];
        let mut x = Array2::zeros((5, 4));
        for (i, row) in pts.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                x[[i, j]] = *v;
            }
        }
        let mu = mean_function(&x, Relationship::Nonlinear).unwrap();
        let pi = std::f64::consts::PI;
        for (i, row) in pts.iter().enumerate() {
            let eta = 0.5 * (pi * row[0]).sin()
                + 0.4 * row[1] * row[1] / 2.0
                + 0.3 * row[2] * row[3]
                + 0.2 * row[3].abs();
            assert!((mu[i] - eta.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_function_needs_four_columns() {
        let x = Array2::zeros((3, 3));
        assert!(mean_function(&x, Relationship::Linear).is_err());
    }

    #[test]
    fn xi_one_is_scaled_poisson() {
        // Reduction to plain Poisson at phi = 1: P(y = 0) = e^{-mu}.
        let ys = draws(4.0, 1.0, 1.0, 100_000, 11);
        assert!(ys.iter().all(|y| y.fract() == 0.0), "integer-valued");
        let p0 = ys.iter().filter(|&&y| y == 0.0).count() as f64 / ys.len() as f64;
        assert!((p0 - (-4.0f64).exp()).abs() < 0.003);
    }

    #[test]
    fn compound_poisson_zero_mass() {
        // Derived: lambda = mu^{2-xi} / (phi (2-xi)) = 4^{0.5} / 0.5 = 4,
        // so P(y = 0) = e^{-4}.
        let ys = draws(4.0, 1.0, 1.5, 100_000, 13);
        let p0 = ys.iter().filter(|&&y| y == 0.0).count() as f64 / ys.len() as f64;
        assert!(
            (p0 - (-4.0f64).exp()).abs() < 0.003,
            "zero mass {p0} vs {}",
            (-4.0f64).exp()
        );
        assert!(ys.iter().all(|&y| y >= 0.0));
    }

    #[test]
    fn gamma_draws_strictly_positive() {
        let ys = draws(4.0, 2.0, 2.0, 20_000, 17);
        assert!(ys.iter().all(|&y| y > 0.0));
    }

    #[test]
    fn moments_match_variance_function() {
        // Spot-check of the full-grid acceptance moment oracle.
        for &(xi, phi) in &[(1.0, 2.0), (1.5, 1.0), (1.5, 4.0), (2.0, 1.0)] {
            for &mu in &[0.5, 4.0] {
                let ys = draws(mu, phi, xi, 100_000, 1000 + (xi * 10.0 + phi) as u64);
                let m = util::mean(&ys);
                let v = util::variance(&ys);
                let target_var = phi * mu.powf(xi);
                assert!(
                    (m - mu).abs() / mu < 0.02,
                    "mean off at xi={xi} phi={phi} mu={mu}: {m}"
                );
                assert!(
                    (v - target_var).abs() / target_var < 0.05,
                    "variance off at xi={xi} phi={phi} mu={mu}: {v} vs {target_var}"
                );
            }
        }
    }

    #[test]
    fn simulate_dataset_shapes_and_determinism() {
        let cfg = SimConfig::new(1.5, 4.0, Relationship::Linear, 5000, 21).unwrap();
        let a = simulate_dataset(&cfg).unwrap();
        let b = simulate_dataset(&cfg).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(a.feature_names[0], "x1");
        assert_eq!(a.feature_names[14], "x15");
        // Compound Poisson-gamma has an atom at zero.
        let zeros = a.outcome.iter().filter(|&&y| y == 0.0).count();
        assert!(zeros > 0, "expected exact zeros, got none");
    }

    #[test]
    fn gamma_dataset_has_no_zeros() {
        let cfg = SimConfig::new(2.0, 1.0, Relationship::Linear, 10000, 22).unwrap();
        let ds = simulate_dataset(&cfg).unwrap();
        assert!(ds.outcome.iter().all(|&y| y > 0.0));
    }

    #[test]
    fn noise_columns_uncorrelated_with_outcome() {
        let cfg = SimConfig::new(2.0, 1.0, Relationship::Linear, 10000, 23).unwrap();
        let ds = simulate_dataset(&cfg).unwrap();
        let y: Vec<f64> = ds.outcome.to_vec();
        let ym = util::mean(&y);
        let ysd = util::variance(&y).sqrt();
        for j in 4..15 {
            let col: Vec<f64> = ds.features.column(j).to_vec();
            let xm = util::mean(&col);
            let xsd = util::variance(&col).sqrt();
            let cov: f64 = col
                .iter()
                .zip(y.iter())
                .map(|(a, b)| (a - xm) * (b - ym))
                .sum::<f64>()
                / (y.len() - 1) as f64;
            let corr = cov / (xsd * ysd);
            assert!(corr.abs() < 0.05, "noise column {j} corr {corr}");
        }
    }

    #[test]
    fn log_mu_regression_recovers_coefficients() {
        // Noise columns carry no signal: OLS of log(mu) on X recovers the
        // linear eta coefficients and zeros elsewhere.
        let cfg = SimConfig::new(2.0, 1.0, Relationship::Linear, 10000, 29).unwrap();
        let mut rng = util::rng_from_seed(cfg.seed);
        let x = make_predictors(&cfg, &mut rng);
        let mu = mean_function(&x, Relationship::Linear).unwrap();
        let log_mu = mu.mapv(f64::ln);
        let (_, beta) = crate::linalg::ols(x.view(), log_mu.view());
        let truth = [0.5, 0.4, 0.3, 0.2];
        for j in 0..15 {
            let target = if j < 4 { truth[j] } else { 0.0 };
            assert!(
                (beta[j] - target).abs() < 0.02,
                "coefficient {j}: {} vs {target}",
                beta[j]
            );
        }
    }

    #[test]
    fn domain_violations_rejected() {
        let mut rng = util::rng_from_seed(1);
        assert!(sample_tweedie(-1.0, 1.0, 1.5, &mut rng).is_err());
        assert!(sample_tweedie(1.0, 0.0, 1.5, &mut rng).is_err());
        assert!(sample_tweedie(1.0, 1.0, 2.5, &mut rng).is_err());
        assert!(SimConfig::new(3.0, 1.0, Relationship::Linear, 10, 1).is_err());
    }
}
