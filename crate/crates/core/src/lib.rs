//! Event-based hidden Markov model of disease progression.
//!
//! A group-level ordering of biomarker events is combined with Markov
//! dynamics over disease stages: stage `k` means the first `k` events of
//! the sequence have occurred. The crate fits the sequence and the stage
//! dynamics to longitudinal cohorts by nested EM, stages individuals,
//! predicts their next stage, derives an event timeline, and benchmarks
//! against an unstructured continuous-time HMM.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the command-line tool uses.

pub mod baseline;
pub mod cohort;
pub mod document;
pub mod error;
pub mod eval;
pub mod inference;
pub mod linalg;
pub mod markov;
pub mod mixture;
pub mod scalar;
pub mod sequence;
pub mod staging;
pub mod synth;

pub use cohort::{Cohort, Diagnosis, Direction, Individual, Observation};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use sequence::EventSequence;

pub type FittedModel = inference::FittedModel<f64>;
pub type TransitionModel = markov::TransitionModel<f64>;
pub type MixturePair = mixture::MixturePair<f64>;
pub type GaussianParams = mixture::GaussianParams<f64>;
pub type PosteriorTables = inference::PosteriorTables<f64>;
pub type StagePath = staging::StagePath<f64>;
pub type Timeline = markov::Timeline<f64>;
pub type CthmmModel = baseline::CthmmModel<f64>;
pub type GroundTruth = synth::GroundTruth<f64>;
pub type ModelDocument = document::ModelDocument<f64>;

pub type FittedModel32 = inference::FittedModel<f32>;
pub type TransitionModel32 = markov::TransitionModel<f32>;
pub type MixturePair32 = mixture::MixturePair<f32>;
pub type StagePath32 = staging::StagePath<f32>;
