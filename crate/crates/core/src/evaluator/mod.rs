//! Evaluation of trained policies: greedy faceoffs and tournaments with ELO
//! ratings, least-squares reward trends, mean-action gap statistics and
//! replay rendering.

pub mod elo;
mod faceoff;
mod gap;
mod render;
pub mod stats;

use std::path::{Path, PathBuf};

use crate::engine::EngineError;
use crate::estimators::EstimatorError;
use crate::learners::LearnerError;
use crate::nncore::NnError;
use crate::trainer::TrainerError;

pub use elo::{elo_deltas, elo_update, expected_score, Outcome, Rating, DEFAULT_K, INITIAL_RATING};
pub use faceoff::{
    faceoff, play_episode, sibling_path, tournament, CheckpointPair, FaceoffPlan, FaceoffResult, RoundRecord, Side,
    TournamentResult, BOOTSTRAP_RESAMPLES, DEFAULT_ROUNDS,
};
pub use gap::{mean_action_gap, mean_action_gap_report, GapReport, GapRow};
pub use render::{frame_name, render_replay, INDEX_FILE};
pub use stats::{fit_least_squares, histogram, std_dev};
pub(crate) use faceoff::csv_string;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("{}: trained on scenario {found}, expected {expected}", path.display())]
    ScenarioMismatch { path: PathBuf, expected: String, found: String },
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Trainer(#[from] TrainerError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl EvalError {
    pub(crate) fn file(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
        move |source| EvalError::File { path: path.to_path_buf(), source }
    }
}
