//! Confidence-gated approximate autoregressive generation (NARA) for 1-D
//! sequences.
//!
//! A prior predictor drafts a chunk of future values from the observed
//! window, the base AR model post-processes the whole chunk in one
//! teacher-forced pass, and a learned confidence score decides how long a
//! prefix of the draft is accepted before falling back to sequential AR
//! sampling.

pub mod ar;
pub mod bundle;
pub mod checkpoint;
pub mod checks;
pub mod config;
pub mod confidence;
pub mod data;
pub mod engine;
pub mod error;
pub mod nn;
pub mod prior;
pub mod rng;
pub mod sweep;
pub mod tensor;
pub mod theory;
pub mod trainer;

pub use error::{NaraError, Result};
