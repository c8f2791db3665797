//! Learning-based link prediction for attributed social networks.
//!
//! The crate covers the whole supervised pipeline:
//!
//! - [`graph`]: loading attributed undirected graphs and structural statistics,
//! - [`metrics`]: neighbour-based pair similarity scores (JC, AA, PA, RAI),
//! - [`node2vec`]: biased second-order walks, skip-gram embeddings, Hadamard edge features,
//! - [`dataset`]: held-out edge sampling, balanced negatives and feature matrices,
//! - [`classifiers`]: logistic regression, random forest, SMO-trained SVM and an MLP,
//! - [`selection`]: RFECV, forest importances and correlation matrices,
//! - [`evaluation`]: AUROC, F1/accuracy and a Fisher LDA separability probe,
//! - [`pipeline`]: the config-driven batch pipeline used by the `linkpred` binary.

pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod metrics;
pub mod node2vec;
pub mod pipeline;
pub mod selection;
pub mod synthetic;
mod util;

pub use error::{Error, Result};
pub use graph::{AttributeRecord, AttributedGraph, GraphStats};
