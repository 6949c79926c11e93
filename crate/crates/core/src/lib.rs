//! Graph-structured intent inference for short text queries.
//!
//! A query is a sequence of (word, POS tag) pairs. Given a domain concept
//! graph, the model jointly predicts which concepts the query mentions and
//! which concept transitions (directed edges) it activates. Two GRU chains
//! read the word and POS sequences; a confidence-weighted concept encoder
//! and a final-state transition encoder produce per-label probabilities.
//! Training couples the two heads through the graph's transfer matrix with
//! a rank-based energy term.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the training
//! harness and the command-line tool live in the `ctinfer` crate.

#![no_std]

extern crate alloc;

pub mod autodiff;
pub mod baseline;
pub mod corpus;
mod error;
pub mod graph;
pub mod init;
pub mod loss;
pub mod math;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::{ActiveConceptGraph, ConceptGraph, TransferMatrix};
pub use tensor::Tensor;
