//! Langevin habitat-selection movement model with Brownian-bridge
//! importance-sampling (BBIS) likelihoods.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the CLI and the study runner use.

pub mod bridges;
pub mod error;
pub mod estimator;
pub mod field;
pub mod likelihood;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod oracle;
mod point;
mod scalar;
pub mod simulator;
pub mod studies;

pub use error::{Error, Result};
pub use point::Point2;
pub use scalar::Scalar;
pub use simulator::Track;

pub type Point = Point2<f64>;
pub type Grid = field::GridSpec<f64>;
pub type Field = field::CovariateField<f64>;
pub type Model = model::RsfModel<f64>;
pub type Observations = simulator::Track<f64>;
pub type Ensemble = bridges::BridgeEnsemble<f64>;
pub type Likelihood = likelihood::TrackLikelihood<f64>;
pub type Config = likelihood::LikelihoodConfig<f64>;
pub type Fit = estimator::FitResult<f64>;
pub type Ou = oracle::OuParams<f64>;
