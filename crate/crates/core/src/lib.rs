//! Model evaluation for spatial binary classification.
//!
//! The crate implements repeated k-fold cross-validation with two
//! partitioning strategies (uniform random and coordinate k-means), random
//! search hyperparameter tuning evaluated by an inner cross-validation, five
//! built-in classifiers behind one train/predict interface, and AUROC
//! scoring with tie handling. A synthetic generator produces spatially
//! autocorrelated datasets so the optimism of non-spatial error estimation
//! can be measured without external data.
//!
//! Numeric kernels are generic over [`num::Scalar`] (`f32` or `f64`); the
//! pipeline types and the CLI use the [`Real`] alias.

pub mod dataset;
pub mod experiment;
pub mod learners;
pub mod metrics;
pub mod num;
pub mod partition;
pub mod seed;
pub mod synth;
pub mod tuner;

mod linalg;

/// Scalar type used by the shipped pipeline and CLI.
pub type Real = f64;
