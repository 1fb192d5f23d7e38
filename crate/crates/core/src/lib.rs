//! Predicting and optimizing a listener's impression of an utterance from
//! both speakers' personality profiles and the dialogue history.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which the pipeline uses throughout.

pub mod ablation;
pub mod abtest;
pub mod corpus;
pub mod encoder;
mod error;
mod scalar;
pub mod simulator;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Encoder parameters in double precision.
pub type Model = encoder::ModelParams<f64>;
/// Training outcome in double precision.
pub type Trained = encoder::TrainOutcome<f64>;
