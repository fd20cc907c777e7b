//! Botnet attack detection on network flow records.
//!
//! A CART decision tree is trained on min-max scaled, SMOTE-rebalanced
//! flow features, with its hyperparameters chosen by Bayesian
//! optimization over a Gaussian-process surrogate.
//!
//! Modules, bottom up:
//!
//! - [`ingest`]: CSV loading, validation, stratified splits and folds
//! - [`preprocess`]: min-max scaler and SMOTE with a provenance log
//! - [`gp`]: RBF Gaussian-process regression
//! - [`bayesopt`]: Expected-Improvement search loop
//! - [`dtree`]: Gini CART classifier
//! - [`metrics`]: confusion-matrix metrics and 2-component PCA
//! - [`pipeline`]: the end-to-end run, tuning, evaluation and benchmarks

pub mod bayesopt;
pub mod dtree;
pub mod error;
pub mod gp;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
pub use ingest::{Dataset, ATTACK, NORMAL};
