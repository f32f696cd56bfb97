//! Link prediction with two complementary channels.
//!
//! The topology channel learns from distance-labelled enclosing subgraphs
//! around each candidate pair. The semantic channel turns node attributes
//! into a kNN graph, embeds it with node2vec, and feeds those embeddings
//! through a second GNN over the same subgraph. A shared attention head
//! fuses the two pair embeddings.
//!
//! Heuristic baselines (common neighbors, Adamic-Adar, personalized
//! PageRank), node2vec, ranking metrics and the train/validation/test
//! protocol live alongside the model so a full benchmark can be run from
//! one crate.
//!
//! Data-parallel loops (kNN rows, walk generation, subgraph extraction,
//! per-example gradients) use rayon when the `parallel` feature is on and
//! fall back to plain iterators otherwise. Results are identical either way.

pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod heuristics;
pub mod neural;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod semantic;
pub mod subgraph;
pub mod synthetic;

pub use error::{Error, Result};
pub use graph::{Edge, EdgeSplit, FeatureMatrix, Graph};
