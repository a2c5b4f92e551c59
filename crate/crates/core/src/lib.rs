//! Generative vs. discriminative linear classifiers.
//!
//! This crate pairs multiclass naive Bayes (discrete Bernoulli and
//! shared-variance Gaussian) with softmax logistic regression so the two can be
//! compared as linear hypotheses of the same shape. On top of the estimators it
//! provides:
//!
//! * a synthetic Gaussian mixture with exact Bayes-classifier oracles,
//! * sample-complexity experiments (training-set size needed to reach the
//!   asymptotic error) and linear-evaluation curves on feature files,
//! * assumption diagnostics (variance floor, KL separation, log-likelihood-ratio
//!   variance) and bound calculators for the logistic/zero-one H-consistency
//!   inequality and the Rademacher generalization bound.
//!
//! Class labels are 0-based `usize` indices everywhere in the API; feature CSV
//! files store them 1-based.
//!
//! The `parallel` feature (on by default) runs experiment grids and Monte-Carlo
//! loops on rayon. Without it every [`Execution`] falls back to sequential
//! iteration; results are identical either way.

pub mod data;
pub mod diagnostics;
mod error;
pub mod exec;
pub mod experiments;
pub mod linear;
pub mod logistic;
pub mod model_io;
pub mod naive_bayes;
pub mod optim;
pub mod plot;
pub mod rng;
pub mod stats;
pub mod synthetic;

pub use data::{ClassCounts, Dataset, MinMaxScaler};
pub use error::{Error, Result};
pub use exec::Execution;
pub use linear::{Classifier, LinearHypothesis};
pub use logistic::{LogisticModel, OptimizerConfig};
pub use naive_bayes::{DiscreteNbModel, GaussianNbModel, GenerativeModel};
pub use synthetic::MixtureSpec;
