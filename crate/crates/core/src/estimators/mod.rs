//! Mean-action estimators: the plain neighborhood average, the Dirichlet
//! posterior sampler and the graph-attention masked average.

mod dirichlet;
pub mod gradcheck;
pub mod graph_attention;
mod mean;

pub use dirichlet::{dirichlet_mean, sample_gamma, DirichletState, DEFAULT_ETA, DEFAULT_SAMPLES};
pub use gradcheck::{gradient_suite, GRADCHECK_EPS, GRADCHECK_LAYERS, GRADCHECK_TOLERANCE};
pub use graph_attention::{masked_mean_tape, GraphAttentionNet, Memory, Star, StarBatch};
pub use mean::{global_mean, masked_mean, AdjacencyMask, MeanAction, NeighborActions};

use thiserror::Error;

use crate::nncore::NnError;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("action vector has length {got}, expected {expected}")]
    ActionLength { expected: usize, got: usize },
    #[error("action {action} outside [0, {n_actions})")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("action of neighbor {0} is not one-hot")]
    NotOneHot(usize),
    #[error("mask has {mask} entries for {actions} neighbors")]
    MaskLength { mask: usize, actions: usize },
    #[error("Dirichlet concentration must be positive, got {0}")]
    Concentration(f64),
    #[error("Dirichlet estimate needs at least one sample")]
    NoSamples,
    #[error("vector is not on the probability simplex")]
    NotOnSimplex,
    #[error(transparent)]
    Nn(#[from] NnError),
}
