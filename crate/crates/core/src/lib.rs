//! Permanent-magnet temperature estimation from standard PMSM drive signals.
//!
//! The crate covers the full benchmark pipeline: dataset ingestion and a
//! synthetic RC-network generator ([`data`]), exponentially weighted
//! streaming features ([`features`]), six regression model families
//! ([`linmodel`], [`neighbors`], [`forest`], [`svr`], [`mlp`]), stratified
//! group cross-validation and metrics ([`eval`]), and Gaussian-process
//! hyperparameter search ([`hpo`]).
//!
//! All numeric code is generic over the floating-point type through
//! [`scalar::Scalar`]; the aliases below pin the common f64 instantiation.

pub mod artifact;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod hpo;
pub mod linalg;
pub mod linmodel;
pub mod mlp;
pub mod model;
pub mod neighbors;
pub mod scalar;
pub mod stream;
pub mod svr;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// f64 instantiations of the central types.
pub type Dataset64 = data::Dataset<f64>;
pub type FeatureMatrix64 = features::FeatureMatrix<f64>;
pub type Scaler64 = features::Scaler<f64>;
pub type TrainedModel64 = model::TrainedModel<f64>;
pub type ModelSpec64 = model::ModelSpec<f64>;

/// f32 instantiations for memory-constrained runs.
pub type Dataset32 = data::Dataset<f32>;
pub type FeatureMatrix32 = features::FeatureMatrix<f32>;
pub type TrainedModel32 = model::TrainedModel<f32>;
