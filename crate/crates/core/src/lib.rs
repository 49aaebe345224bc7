//! Morse-Smale piecewise regression.
//!
//! The crate decomposes a regression problem topologically and fits a
//! separate model to each piece:
//!
//! 1. build a symmetric k-nearest-neighbor graph over standardized
//!    predictors ([`knn`]),
//! 2. compute the discrete Morse-Smale complex of the outcome over that
//!    graph, simplify it by persistence, and pick a partition level
//!    ([`morse`]),
//! 3. fit a learner per partition and route new points to partitions by
//!    nearest training neighbor ([`piecewise`]).
//!
//! Six learners share one [`piecewise::Regressor`] contract: elastic net,
//! homotopy-path LASSO, componentwise boosted linear regression
//! ([`linear`]), conditional inference trees, random forests ([`tree`]),
//! and extreme learning machines ([`elm`]).
//!
//! [`tweedie`] simulates regression datasets with Tweedie-distributed
//! outcomes (Poisson, compound Poisson-gamma, gamma), and [`bench`] runs
//! the simulation grid and real-data trials across all twelve algorithm
//! variants, aggregating test MSE into machine-readable reports.

pub mod bench;
pub mod dataset;
pub mod elm;
pub mod error;
pub mod knn;
pub mod linalg;
pub mod linear;
pub mod morse;
pub mod piecewise;
pub mod tree;
pub mod tweedie;
pub mod util;

pub use dataset::{Dataset, ScalingParams};
pub use error::{Error, Result};
pub use knn::KnnGraph;
