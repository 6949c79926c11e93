//! File formats, training harness and reporting around `ctinfer-core`.

pub mod checkpoint;
pub mod config;
mod error;
pub mod graph_file;
pub mod harness;
pub mod records;
pub mod reports;

pub use error::{Error, Result};
