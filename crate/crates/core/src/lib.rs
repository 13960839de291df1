//! Neural semi-Markov CRF for sequence segmentation.
//!
//! The crate is `no_std` and only needs `alloc`. It contains a small
//! define-by-run reverse-mode differentiation engine, the bi-LSTM unit
//! encoder, three segment composition functions (recurrent, convolutional
//! and padded concatenation), segment and label embeddings, exact 0-order
//! semi-CRF inference, SGD training and span-level evaluation.
//!
//! File formats, checkpoints and the command-line tool live in the `segrep`
//! crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bieso;
pub mod composition;
pub mod embedding;
pub mod encoder;
mod error;
pub mod eval;
pub mod graph;
pub mod lstm;
pub mod model;
pub mod normalize;
pub mod params;
pub mod segment;
pub mod semicrf;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{Graph, NodeId};
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use segment::{Example, LabelSet, LabeledCorpus, Segment, Segmentation, TaskKind};
pub use tensor::Tensor;
