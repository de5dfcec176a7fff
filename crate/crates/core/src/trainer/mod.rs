//! Self-play training: episode generation, replay storage, minibatch
//! updates, target sync, checkpoints and per-episode metrics.

pub mod rollout;
mod train;

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::engine::{EngineError, ScenarioConfig, ScenarioSpec};
use crate::estimators::EstimatorError;
use crate::learners::{Hyperparameters, LearnerError, LearnerKind};
use crate::nncore::NnError;

pub use rollout::{AgentStep, Controller, Rollout, StepRecord};
pub use train::{
    checkpoint_path, read_metrics, replay_sidecar_path, resume, team_label, train, EpisodeMetrics, TrainRun, Trainer,
    METRICS_FILE, TIMING_FILE,
};

pub const DEFAULT_EPOCHS: usize = 2000;
pub const DEFAULT_UPDATE_EVERY: usize = 4;
pub const DEFAULT_CHECKPOINT_INTERVAL: usize = 250;

#[derive(Debug, thiserror::Error)]
pub enum TrainerError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("incompatible learner: {0}")]
    Incompatible(String),
    #[error("checkpoint was trained on scenario {found}, config describes {expected}")]
    ScenarioMismatch { expected: String, found: String },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("non-finite loss ({loss}) for team {team} in episode {episode}; batch written to {}", dump.display())]
    NonFiniteLoss { team: usize, episode: usize, loss: f64, dump: PathBuf },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("metrics: {0}")]
    Metrics(#[from] csv::Error),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl TrainerError {
    pub(crate) fn file(path: &Path) -> impl FnOnce(std::io::Error) -> TrainerError + '_ {
        move |source| TrainerError::File { path: path.to_path_buf(), source }
    }
}

/// Everything a training run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub scenario: ScenarioSpec,
    pub kind: LearnerKind,
    /// Training episodes.
    pub epochs: usize,
    pub hyper: Hyperparameters,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub seed: u64,
    /// Episodes between checkpoints; the last episode is always saved.
    pub checkpoint_interval: usize,
    /// Environment steps between minibatch updates.
    pub update_every: usize,
    pub out_dir: PathBuf,
    /// Threads for per-agent work; results do not depend on it.
    pub workers: usize,
}

/// Keys accepted in a config file's `[training]` table.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainingSection {
    algorithm: Option<LearnerKind>,
    epochs: Option<usize>,
    seed: Option<u64>,
    lr: Option<f64>,
    gamma: Option<f64>,
    tau: Option<f64>,
    beta: Option<f64>,
    buffer_capacity: Option<usize>,
    batch_size: Option<usize>,
    hidden: Option<usize>,
    gat_hidden: Option<usize>,
    actor_temperature: Option<f64>,
    dirichlet_eta: Option<f64>,
    dirichlet_samples: Option<usize>,
    epsilon_start: Option<f64>,
    epsilon_end: Option<f64>,
    checkpoint_interval: Option<usize>,
    update_every: Option<usize>,
}

impl TrainConfig {
    pub fn new(scenario: ScenarioSpec, kind: LearnerKind, out_dir: impl Into<PathBuf>) -> Self {
        TrainConfig {
            scenario,
            kind,
            epochs: DEFAULT_EPOCHS,
            hyper: Hyperparameters::default(),
            epsilon_start: 1.0,
            epsilon_end: 0.0,
            seed: 0,
            checkpoint_interval: DEFAULT_CHECKPOINT_INTERVAL,
            update_every: DEFAULT_UPDATE_EVERY,
            out_dir: out_dir.into(),
            workers: 1,
        }
    }

    /// Builds a config from a scenario file's `[training]` table. `kind` and
    /// `seed`, when given, override the table.
    pub fn from_scenario_config(
        config: &ScenarioConfig,
        kind: Option<LearnerKind>,
        seed: Option<u64>,
        out_dir: impl Into<PathBuf>,
    ) -> Result<Self, TrainerError> {
        let section: TrainingSection = match &config.training {
            Some(table) => table.clone().try_into().map_err(|e: toml::de::Error| TrainerError::Config(e.to_string()))?,
            None => TrainingSection::default(),
        };
        let kind = kind
            .or(section.algorithm)
            .ok_or_else(|| TrainerError::Config("no algorithm given (flag or [training] algorithm)".into()))?;
        let mut out = TrainConfig::new(config.spec.clone(), kind, out_dir);
        let h = &mut out.hyper;
        macro_rules! take {
            ($($field:ident => $slot:expr),* $(,)?) => {
                $(if let Some(v) = section.$field { $slot = v; })*
            };
        }
        take! {
            lr => h.lr, gamma => h.gamma, tau => h.tau, beta => h.beta,
            buffer_capacity => h.buffer_capacity, batch_size => h.batch_size,
            hidden => h.hidden, gat_hidden => h.gat_hidden,
            actor_temperature => h.actor_temperature,
            dirichlet_eta => h.dirichlet_eta, dirichlet_samples => h.dirichlet_samples,
            epochs => out.epochs, epsilon_start => out.epsilon_start, epsilon_end => out.epsilon_end,
            checkpoint_interval => out.checkpoint_interval, update_every => out.update_every,
            seed => out.seed,
        }
        if let Some(s) = seed {
            out.seed = s;
        }
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), TrainerError> {
        self.scenario.validate()?;
        self.hyper.validate()?;
        if self.epochs == 0 || self.checkpoint_interval == 0 || self.update_every == 0 || self.workers == 0 {
            return Err(TrainerError::Config(
                "epochs, checkpoint_interval, update_every and workers must be positive".into(),
            ));
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.epsilon_start) || !unit.contains(&self.epsilon_end) {
            return Err(TrainerError::Config("exploration endpoints must lie in [0, 1]".into()));
        }
        Ok(())
    }
}
