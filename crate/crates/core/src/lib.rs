//! Identify and remove mislabeled training instances with cross-validated
//! ensemble filters.
//!
//! The pipeline: split a [`Dataset`](data::Dataset) into train and test,
//! optionally corrupt training labels between confusable class pairs
//! ([`noise`]), tag every training instance with the verdicts of `m`
//! detectors trained on the other folds ([`filter::cv_tag`]), discard
//! instances according to a [`FilterPolicy`](filter::FilterPolicy), and train
//! the final classifier on what remains. [`analysis`] holds the empirical
//! metrics and the closed-form error model; [`harness`] runs whole
//! experiments and writes report tables.

pub mod analysis;
pub mod data;
pub mod error;
pub mod filter;
pub mod harness;
pub mod learners;
pub mod noise;
pub mod seed;

pub use data::{load_dataset, Dataset, Instance, Schema, Value};
pub use error::{Error, Result};

pub use learners::{Classifier, LearnerKind, LearnerSpec, Model};

pub use filter::{FilterPolicy, FilterResult, TagMatrix};
pub use noise::{CorruptionMask, NoiseSpec};
pub use seed::Seed;
