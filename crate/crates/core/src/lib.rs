//! Quad-modal intent inference at desk scale: accelerometer windowing and
//! next-behaviour labels, intent-matched benchmark synthesis, a small fusion
//! transformer with time-series control tokens, two-stage training and
//! MCQ / ablation / predictive-entropy evaluation.

pub mod biosignal;
pub mod config;
pub mod curation;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod model;
pub mod npy;
pub mod seed;
pub mod synthetic;
pub mod taxonomy;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
