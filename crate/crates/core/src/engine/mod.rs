//! Deterministic gridworld simulator: three two-team scenarios, partial
//! observations, simultaneous attacks and replay logs.

mod observe;
mod render;
mod replay;
mod scenario;
mod world;

pub use observe::{ObsLayout, Observation, FOOD_FEATURES, NEIGHBOR_PREFIX, SELF_FEATURES};
pub use render::{render_frame, CELL_PIXELS};
pub use replay::{Replay, ReplayHeader, ReplayRecord, ReplayWriter};
pub use scenario::{
    Action, ActionId, AgentClass, ClassKind, RewardTable, ScenarioConfig, ScenarioKind, ScenarioSpec, TeamSpec,
    DEFAULT_EPISODE_LENGTH, DEFAULT_FOOD_COUNT, DEFAULT_MAP_SIDE, DEFAULT_MAX_NEIGHBORS, DEFAULT_OBS_RADIUS,
    VISIBLE_FOOD,
};
pub use world::{AgentState, StepOutcome, TerminalCause, Winner, World, WorldState, PLACEMENT_ATTEMPTS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("config: {0}")]
    Config(String),
    #[error("placement failed: {0}")]
    Placement(String),
    #[error("unknown agent {0}")]
    UnknownAgent(usize),
    #[error("agent {0} is dead")]
    DeadAgent(usize),
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("living agent {0} has no action")]
    MissingAction(usize),
    #[error("agent {agent}: action {action} outside [0, {n_actions})")]
    InvalidAction { agent: usize, action: usize, n_actions: usize },
    #[error("episode already terminated")]
    Terminated,
    #[error("winner requested before the episode ended")]
    NotTerminal,
    #[error("invalid world state: {0}")]
    InvalidState(String),
    #[error("replay line {line}: {message}")]
    Replay { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
