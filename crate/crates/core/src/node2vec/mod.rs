//! node2vec embeddings: second-order biased random walks fed into a
//! skip-gram model trained with negative sampling.

mod grid;
mod skipgram;
mod table;
mod walk;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{grid_report_csv, grid_search_embeddings, GridEntry};
pub use skipgram::{
    sgns_gradients, sgns_loss, train_embeddings, train_embeddings_logged, SgnsGradients, TrainMode,
    TrainingLog,
};
pub use table::{edge_embedding, EmbeddingTable};
pub use walk::{generate_walks, transition_weights, Walk, WalkReport};

/// Walk and skip-gram hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkConfig {
    pub dimensions: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    /// Return parameter `p`; the weight of stepping back is `1/p`.
    pub return_p: f64,
    /// In-out parameter `q`; the weight of moving away is `1/q`.
    pub in_out_q: f64,
    pub window: usize,
    pub negatives_per_positive: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub mode: TrainMode,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            dimensions: 64,
            walks_per_node: 50,
            walk_length: 20,
            return_p: 1.0,
            in_out_q: 0.8,
            window: 10,
            negatives_per_positive: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
            mode: TrainMode::Sequential,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("walk config: {msg}")));
        if self.dimensions < 1 {
            return bad("dimensions must be >= 1");
        }
        if self.walk_length < 2 {
            return bad("walk_length must be >= 2");
        }
        if !(self.return_p > 0.0 && self.return_p.is_finite()) {
            return bad("return_p must be a positive finite number");
        }
        if !(self.in_out_q > 0.0) {
            return bad("in_out_q must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}
