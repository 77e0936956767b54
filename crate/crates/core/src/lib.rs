//! Core numerics for gauge-invariant spectral transformers.
//!
//! Everything here is `no_std` + `alloc`: graphs in compressed adjacency
//! form, spectral embeddings (exact eigenmaps and FastRP), linear attention
//! with the gauge-invariant and gauge-equivariant spectral variants, the
//! multi-scale block, a small reverse-mode tape for training, and the
//! manifold discretization laboratory.
//!
//! File formats, timing and the command line live in the `gist` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attention;
pub mod autodiff;
pub mod block;
mod error;
pub mod graph;
pub mod linalg;
pub mod manifold;
pub mod rng;
pub mod spectral;
pub mod synthetic;
pub mod tasks;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{DenseOperator, FeatureMatrix, Graph, OperatorKind};
pub use linalg::Mat;
pub use spectral::{EmbeddingSource, SpectralEmbedding};

/// Largest node count for which dense N×N operators are materialized.
pub const DEFAULT_ORACLE_CAP: usize = 2048;
