//! Directed-graph toolkit: sparse diffusion operators, label homophily
//! under those operators, synthetic generators, directional message-passing
//! networks with their training loop, and Weisfeiler-Leman refinement.
//!
//! The `parallel` feature (on by default) lets row-independent kernels and
//! multi-seed runs fan out through rayon; see [`Execution`].

pub mod error;
pub mod graph;
pub mod homophily;
pub mod io;
pub mod nn;
pub mod operators;
pub mod par;
pub mod synth;
pub mod train;
pub mod wl;

pub use error::{Error, Result};
pub use graph::{DirectedGraph, LabeledNodes, StatsReport};
pub use homophily::{effective_homophily, node_homophily, HomophilyReport};
pub use operators::{OperatorKind, SparseMatrix};
pub use par::Execution;
