//! Active-learning acquisition functions and the query dispatcher.
//!
//! Every selector returns distinct positions into the task's current
//! pool; [`query`] wires a proxy model to the chosen strategy. All
//! strategies are deterministic given their inputs and a seed.

mod badge;
mod coreset;
mod kmeans;
mod scores;

pub use badge::{badge_select, gradient_embeddings};
pub use coreset::coreset_select;
pub use kmeans::kmeans_select;
pub use scores::{score_entropy, score_margin, select_top_k};

use crate::error::{Error, Result};
use crate::nn::ModelState;
use crate::seeds::{self, label};
use crate::streams::{Scenario, Task};
use serde::{Deserialize, Serialize};

/// The acquisition-function catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlStrategy {
    Random,
    Entropy,
    Margin,
    Badge,
    Coreset,
    Kmeans,
}

impl AlStrategy {
    pub fn name(self) -> &'static str {
        match self {
            AlStrategy::Random => "random",
            AlStrategy::Entropy => "entropy",
            AlStrategy::Margin => "margin",
            AlStrategy::Badge => "badge",
            AlStrategy::Coreset => "coreset",
            AlStrategy::Kmeans => "kmeans",
        }
    }

    pub const ALL: [AlStrategy; 6] = [
        AlStrategy::Random,
        AlStrategy::Entropy,
        AlStrategy::Margin,
        AlStrategy::Badge,
        AlStrategy::Coreset,
        AlStrategy::Kmeans,
    ];
}

impl std::fmt::Display for AlStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A selected batch of pool positions, with scores when the strategy
/// produces them.
#[derive(Debug, Clone)]
pub struct QueryBatch {
    /// Distinct positions into the task's current pool.
    pub pool_positions: Vec<usize>,
    pub scores: Option<Vec<f64>>,
    pub strategy: AlStrategy,
}

/// Builds the AL query: scores the unlabelled pool under the proxy model
/// and selects `k` items with the chosen strategy. Task-IL proxies score
/// with the current task's class mask.
pub fn query(
    strategy: AlStrategy,
    proxy: &ModelState,
    task: &Task,
    num_classes_total: usize,
    k: usize,
    seed: u64,
) -> Result<QueryBatch> {
    let pool_len = task.pool_len();
    if pool_len == 0 {
        return Err(Error::contract("cannot query an empty pool"));
    }
    if k > pool_len || k > task.remaining_budget() {
        return Err(Error::contract(format!(
            "query size {k} exceeds pool {pool_len} or remaining budget {}",
            task.remaining_budget()
        )));
    }
    let mask = match task.scenario() {
        Scenario::TaskIl => Some(task.class_mask(num_classes_total)),
        _ => None,
    };

    let (positions, scores) = match strategy {
        AlStrategy::Random => {
            let mut rng = seeds::rng(seed, &[label::QUERY]);
            let picked = rand::seq::index::sample(&mut rng, pool_len, k).into_vec();
            (picked, None)
        }
        AlStrategy::Entropy | AlStrategy::Margin => {
            let inputs = task.pool_inputs_f64();
            let trace = proxy.forward(&inputs, mask.as_deref())?;
            let s = match strategy {
                AlStrategy::Entropy => score_entropy(&trace.probs)?,
                _ => score_margin(&trace.probs)?,
            };
            let picked = select_top_k(&s, k)?;
            let picked_scores = picked.iter().map(|&i| s[i]).collect();
            (picked, Some(picked_scores))
        }
        AlStrategy::Badge => {
            let inputs = task.pool_inputs_f64();
            let emb = gradient_embeddings(proxy, &inputs)?;
            (badge_select(&emb, k, seed)?, None)
        }
        AlStrategy::Coreset => {
            let pool = task.pool_inputs_f64();
            let pool_emb = proxy.forward(&pool, None)?.penultimate;
            let labelled_emb = {
                let (inputs, _) = task.labelled_examples();
                if inputs.rows() == 0 {
                    crate::linalg::Matrix::zeros(0, pool_emb.cols())
                } else {
                    proxy.forward(&inputs, None)?.penultimate
                }
            };
            (coreset_select(&pool_emb, &labelled_emb, k)?, None)
        }
        AlStrategy::Kmeans => {
            let pool = task.pool_inputs_f64();
            let pool_emb = proxy.forward(&pool, None)?.penultimate;
            (kmeans_select(&pool_emb, k, seed)?, None)
        }
    };

    debug_assert_eq!(positions.len(), k);
    Ok(QueryBatch {
        pool_positions: positions,
        scores,
        strategy,
    })
}
