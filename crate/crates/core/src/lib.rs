//! Hyperedge copy model for growing hypergraphs.
//!
//! New hyperedges form as noisy copies of a uniformly chosen earlier hyperedge,
//! topped up with extant nodes from elsewhere in the hypergraph and freshly created
//! nodes. This crate provides:
//!
//! - [`hypergraph`]: the temporal hypergraph data model, TSV ingestion and indexed queries,
//! - [`gen`]: forward simulation of the copy model and two baseline growth models,
//! - [`asym`]: closed-form asymptotics (edge sizes, degrees, pairwise intersections),
//! - [`sem`]: parameter inference by stochastic expectation-maximization,
//! - [`linkpred`]: a hyperedge link-prediction benchmark harness,
//! - [`metrics`]: empirical structural measurements,
//! - [`cli`]: the `hypercopy` command-line front end.

pub mod asym;
pub mod cli;
pub mod error;
pub mod gen;
pub mod hypergraph;
pub mod linkpred;
pub mod metrics;
pub mod params;
pub mod sem;

pub use error::{Error, Result};
pub use hypergraph::{EdgeRecord, NodeId, TemporalHypergraph};
pub use params::ModelParams;
