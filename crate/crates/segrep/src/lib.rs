//! File formats, checkpoints and training pipeline for the `segrep`
//! semi-Markov CRF toolkit. The model itself lives in `segrep-core`.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod emit;
mod error;
pub mod pipeline;

pub use error::{Error, ErrorClass, Result};
pub use segrep_core as core;
