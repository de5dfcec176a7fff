//! Mean-field learners: MF-Q, MF-AC, the Dirichlet-sampled partially
//! observable variant and the graph-attention variant, with their replay
//! buffer and exploration policy.

mod learner;
pub mod policy;
pub mod qnet;
pub mod replay;

pub use learner::{AttentionInputs, CriticBatch, Hyperparameters, Learner, LearnerKind, LearnerRecord, UpdateLosses};
pub use policy::{boltzmann_policy, sample_action, ExplorationSchedule};
pub use qnet::{QNet, ACTOR_PREFIX, Q_PREFIX};
pub use replay::{ReplayBuffer, ReplayStats, Transition, DEFAULT_BATCH, DEFAULT_CAPACITY};

use crate::estimators::EstimatorError;
use crate::nncore::NnError;

#[derive(Debug, thiserror::Error)]
pub enum LearnerError {
    #[error("unknown learner `{0}` (expected mfq, mfac, pomfq_for or gamfq)")]
    UnknownKind(String),
    #[error("invalid hyperparameters: {0}")]
    Hyper(String),
    #[error("Q-value row is empty")]
    EmptyQValues,
    #[error("inverse temperature must be non-negative, got {0}")]
    Beta(f64),
    #[error("empty minibatch")]
    EmptyBatch,
    #[error("malformed minibatch: {0}")]
    Batch(String),
    #[error("`{0}` has no actor")]
    NotActorCritic(LearnerKind),
    #[error("loss became non-finite ({0})")]
    NonFiniteLoss(f64),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Nn(#[from] NnError),
}
