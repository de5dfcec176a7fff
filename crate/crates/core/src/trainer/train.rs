use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{TerminalCause, World};
use crate::learners::{
    ExplorationSchedule, Learner, LearnerError, LearnerKind, ReplayBuffer, ReplayStats, Transition, UpdateLosses,
};
use crate::nncore::Checkpoint;
use crate::rng;

use super::rollout::{Controller, Rollout, STREAM_SAMPLE, STREAM_UPDATE};
use super::{TrainConfig, TrainerError};

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";

const STREAM_INIT: u64 = 5;
const END_OF_EPISODE: u64 = u64::MAX;

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub steps: usize,
    pub reward_a: f64,
    pub reward_b: f64,
    pub survivors_a: usize,
    pub survivors_b: usize,
    pub kills_a: usize,
    pub kills_b: usize,
    pub updates: usize,
    pub loss_a: Option<f64>,
    pub loss_b: Option<f64>,
    pub actor_loss_a: Option<f64>,
    pub actor_loss_b: Option<f64>,
    pub epsilon: f64,
}

#[derive(Serialize)]
struct TimingRow {
    episode: usize,
    wall_seconds: f64,
}

/// What a run produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainRun {
    /// Rows written by this invocation.
    pub metrics: Vec<EpisodeMetrics>,
    /// Wall-clock seconds per episode, same order as `metrics`.
    pub wall_seconds: Vec<f64>,
    /// Checkpoints written, team A before team B for each save.
    pub checkpoints: Vec<PathBuf>,
}

/// Trainer state stored in each checkpoint's header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunState {
    algorithm: LearnerKind,
    team: usize,
    episode: usize,
    epochs: usize,
    seed: u64,
    epsilon_start: f64,
    epsilon_end: f64,
    update_every: usize,
    replay: ReplayStats,
}

pub fn team_label(team: usize) -> char {
    if team == 0 {
        'a'
    } else {
        'b'
    }
}

/// `<dir>/<alg>_<a|b>_<episode>.ckpt`.
pub fn checkpoint_path(dir: &Path, kind: LearnerKind, team: usize, episode: usize) -> PathBuf {
    dir.join(format!("{kind}_{}_{episode}.ckpt", team_label(team)))
}

/// Replay-buffer sidecar written next to a checkpoint.
pub fn replay_sidecar_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("replay")
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpisodeMetrics>, TrainerError> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<Result<_, _>>()?)
}

/// A run in progress: both teams' learners and buffers and the next
/// episode to play.
#[derive(Debug)]
pub struct Trainer {
    config: TrainConfig,
    learners: [Learner; 2],
    buffers: [ReplayBuffer; 2],
    next_episode: usize,
    scenario_hash: String,
}

/// Trains from scratch.
pub fn train(config: TrainConfig) -> Result<TrainRun, TrainerError> {
    Trainer::new(config)?.run()
}

/// Continues the run that wrote `checkpoint` (either team's file). The
/// seed, learner state, replay buffers (when their sidecars exist) and the
/// episode counter come from the checkpoints; the epoch budget and output
/// directory come from `config`.
pub fn resume(checkpoint: &Path, config: TrainConfig) -> Result<TrainRun, TrainerError> {
    Trainer::resume(checkpoint, config)?.run()
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self, TrainerError> {
        config.validate()?;
        let world = World::with_seed(&config.scenario, config.seed, 0)?;
        let f = world.obs_layout().feature_len();
        let learners = [0usize, 1].map(|team| {
            let l = world.class(team as u8).n_actions();
            let mut init = rng::stream(config.seed, &[STREAM_INIT, team as u64]);
            Learner::new(config.kind, f, l, config.hyper.clone(), &mut init)
        });
        let [a, b] = learners;
        let buffers = [ReplayBuffer::new(config.hyper.buffer_capacity), ReplayBuffer::new(config.hyper.buffer_capacity)];
        Ok(Trainer {
            scenario_hash: config.scenario.hash(),
            learners: [a?, b?],
            buffers,
            next_episode: 1,
            config,
        })
    }

    pub fn resume(checkpoint: &Path, mut config: TrainConfig) -> Result<Self, TrainerError> {
        let first = Checkpoint::load(checkpoint)?;
        let state: RunState = serde_json::from_value(first.header.extra.clone())
            .map_err(|e| TrainerError::Checkpoint(format!("{}: {e}", checkpoint.display())))?;
        let dir = checkpoint.parent().unwrap_or(Path::new("."));
        let mut learners = Vec::with_capacity(2);
        let mut buffers = Vec::with_capacity(2);
        let expected = config.scenario.hash();
        for team in 0..2 {
            let path = checkpoint_path(dir, state.algorithm, team, state.episode);
            let ckpt = if team == state.team { first.clone() } else { Checkpoint::load(&path)? };
            if ckpt.header.scenario_hash != expected {
                return Err(TrainerError::ScenarioMismatch { expected, found: ckpt.header.scenario_hash });
            }
            let s: RunState = serde_json::from_value(ckpt.header.extra.clone())
                .map_err(|e| TrainerError::Checkpoint(format!("{}: {e}", path.display())))?;
            if s.team != team || s.episode != state.episode || s.seed != state.seed || s.algorithm != state.algorithm {
                return Err(TrainerError::Checkpoint(format!("{} does not belong to the same run", path.display())));
            }
            let learner = Learner::from_checkpoint(&ckpt)?;
            let sidecar = replay_sidecar_path(&path);
            let buffer = if sidecar.exists() {
                ReplayBuffer::from_checkpoint(&Checkpoint::load(&sidecar)?)?
            } else {
                ReplayBuffer::new(learner.hyper().buffer_capacity)
            };
            learners.push(learner);
            buffers.push(buffer);
        }
        if config.kind != state.algorithm {
            return Err(TrainerError::Incompatible(format!(
                "checkpoint holds {} learners, config asks for {}",
                state.algorithm, config.kind
            )));
        }
        if state.episode >= config.epochs {
            return Err(TrainerError::Config(format!(
                "checkpoint is at episode {} of a {}-episode budget",
                state.episode, config.epochs
            )));
        }
        config.seed = state.seed;
        config.hyper = learners[0].hyper().clone();
        config.epsilon_start = state.epsilon_start;
        config.epsilon_end = state.epsilon_end;
        config.update_every = state.update_every;
        config.validate()?;
        let [a, b]: [Learner; 2] = learners.try_into().expect("two teams");
        let [ba, bb]: [ReplayBuffer; 2] = buffers.try_into().expect("two teams");
        Ok(Trainer {
            scenario_hash: expected,
            learners: [a, b],
            buffers: [ba, bb],
            next_episode: state.episode + 1,
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn learners(&self) -> &[Learner; 2] {
        &self.learners
    }

    pub fn buffers(&self) -> &[ReplayBuffer; 2] {
        &self.buffers
    }

    pub fn next_episode(&self) -> usize {
        self.next_episode
    }

    pub fn schedule(&self) -> ExplorationSchedule {
        ExplorationSchedule::with_endpoints(self.config.epochs, self.config.epsilon_start, self.config.epsilon_end)
    }

    /// Plays the remaining episodes, writing metrics and checkpoints.
    pub fn run(mut self) -> Result<TrainRun, TrainerError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .map_err(|e| TrainerError::Config(e.to_string()))?;
        pool.install(|| self.run_serial())
    }

    fn run_serial(&mut self) -> Result<TrainRun, TrainerError> {
        let dir = self.config.out_dir.clone();
        fs::create_dir_all(&dir).map_err(TrainerError::file(&dir))?;
        let metrics_path = dir.join(METRICS_FILE);
        let timing_path = dir.join(TIMING_FILE);
        let kept = self.next_episode - 1;
        let mut metrics = open_log::<EpisodeMetrics>(&metrics_path, kept, |r| r.episode)?;
        let mut timing = open_log::<TimingEntry>(&timing_path, kept, |r| r.episode)?;

        let mut run = TrainRun::default();
        while self.next_episode <= self.config.epochs {
            let episode = self.next_episode;
            let started = Instant::now();
            let row = self.play_episode(episode)?;
            let wall = started.elapsed().as_secs_f64();
            metrics.serialize(&row)?;
            metrics.flush().map_err(TrainerError::file(&metrics_path))?;
            timing.serialize(TimingRow { episode, wall_seconds: wall })?;
            timing.flush().map_err(TrainerError::file(&timing_path))?;
            run.metrics.push(row);
            run.wall_seconds.push(wall);
            self.next_episode += 1;
            if episode % self.config.checkpoint_interval == 0 || episode == self.config.epochs {
                run.checkpoints.extend(self.save(episode)?);
            }
        }
        Ok(run)
    }

    /// Writes both teams' checkpoints and replay sidecars for `episode`.
    pub fn save(&self, episode: usize) -> Result<Vec<PathBuf>, TrainerError> {
        let mut written = Vec::with_capacity(2);
        for team in 0..2 {
            let state = RunState {
                algorithm: self.config.kind,
                team,
                episode,
                epochs: self.config.epochs,
                seed: self.config.seed,
                epsilon_start: self.config.epsilon_start,
                epsilon_end: self.config.epsilon_end,
                update_every: self.config.update_every,
                replay: self.buffers[team].stats(),
            };
            let extra = serde_json::to_value(&state).map_err(|e| TrainerError::Checkpoint(e.to_string()))?;
            let path = checkpoint_path(&self.config.out_dir, self.config.kind, team, episode);
            self.learners[team].to_checkpoint(&self.scenario_hash, extra)?.save(&path)?;
            self.buffers[team].to_checkpoint(&self.scenario_hash)?.save(&replay_sidecar_path(&path))?;
            written.push(path);
        }
        Ok(written)
    }

    fn play_episode(&mut self, episode: usize) -> Result<EpisodeMetrics, TrainerError> {
        let seed = self.config.seed;
        let epsilon = self.schedule().epsilon(episode);
        let world = World::with_seed(&self.config.scenario, seed, episode as u64)?;
        let mut rollout = {
            let controllers = self.controllers();
            Rollout::new(world, seed, &controllers)?
        };
        let mut kills = [0usize; 2];
        let mut losses: [Vec<UpdateLosses>; 2] = [Vec::new(), Vec::new()];

        while !rollout.world().is_terminal() {
            let t = rollout.world().step_index();
            let record = {
                let controllers = self.controllers();
                rollout.step(&controllers, [epsilon; 2])?
            };
            let world = rollout.world();
            for &(attacker, _) in &record.outcome.kills {
                kills[usize::from(world.agents()[attacker].team)] += 1;
            }
            let eliminated = record.outcome.terminal_cause == Some(TerminalCause::TeamEliminated);
            for (team, steps) in record.agents.into_iter().enumerate() {
                for s in steps {
                    let next = rollout.observation(s.id);
                    self.buffers[team].push(Transition {
                        next_obs: next.map_or_else(|| s.obs.clone(), |o| o.features.clone()),
                        terminal: next.is_none() || eliminated,
                        reward: record.outcome.rewards[s.id],
                        obs: s.obs,
                        action: s.action,
                        mean_action: s.mean_action,
                        neighbor_actions: s.neighbor_actions,
                        hidden: s.hidden,
                    });
                }
            }
            if (t + 1) % self.config.update_every == 0 {
                self.update_teams(episode, (t + 1) as u64, &mut losses)?;
            }
        }
        self.update_teams(episode, END_OF_EPISODE, &mut losses)?;

        let world = rollout.world();
        let survivors = world.survivors();
        let reward = world.state().cumulative_team_reward;
        let mean = |v: &[UpdateLosses], f: fn(&UpdateLosses) -> Option<f64>| {
            let xs: Vec<f64> = v.iter().filter_map(f).collect();
            (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
        };
        Ok(EpisodeMetrics {
            episode,
            steps: world.step_index(),
            reward_a: reward[0],
            reward_b: reward[1],
            survivors_a: survivors[0],
            survivors_b: survivors[1],
            kills_a: kills[0],
            kills_b: kills[1],
            updates: losses[0].len(),
            loss_a: mean(&losses[0], |l| Some(l.critic)),
            loss_b: mean(&losses[1], |l| Some(l.critic)),
            actor_loss_a: mean(&losses[0], |l| l.actor),
            actor_loss_b: mean(&losses[1], |l| l.actor),
            epsilon,
        })
    }

    fn controllers(&self) -> [Controller<'_>; 2] {
        [0, 1].map(|team| Controller::Learner { learner: &self.learners[team], greedy: false })
    }

    /// One minibatch update and target sync per team whose buffer holds a
    /// full batch. The teams update concurrently.
    fn update_teams(&mut self, episode: usize, tag: u64, losses: &mut [Vec<UpdateLosses>; 2]) -> Result<(), TrainerError> {
        let seed = self.config.seed;
        let [la, lb] = &mut self.learners;
        let [ba, bb] = &self.buffers;
        let (ra, rb) = rayon::join(
            || update_team(la, ba, seed, 0, episode, tag),
            || update_team(lb, bb, seed, 1, episode, tag),
        );
        for (team, result) in [ra, rb].into_iter().enumerate() {
            match result {
                Ok(Some(l)) => losses[team].push(l),
                Ok(None) => {}
                Err((LearnerError::NonFiniteLoss(loss), batch)) => {
                    let dump = self.config.out_dir.join(format!("nan_dump_{}_{episode}.json", team_label(team)));
                    let body = serde_json::json!({ "team": team, "episode": episode, "loss": loss.to_string(), "batch": batch });
                    fs::write(&dump, serde_json::to_vec_pretty(&body).expect("json"))
                        .map_err(TrainerError::file(&dump))?;
                    return Err(TrainerError::NonFiniteLoss { team, episode, loss, dump });
                }
                Err((e, _)) => return Err(e.into()),
            }
        }
        Ok(())
    }
}

fn update_team(
    learner: &mut Learner,
    buffer: &ReplayBuffer,
    seed: u64,
    team: u64,
    episode: usize,
    tag: u64,
) -> Result<Option<UpdateLosses>, (LearnerError, Vec<Transition>)> {
    let k = learner.hyper().batch_size;
    if buffer.len() < k {
        return Ok(None);
    }
    let batch = buffer.sample(k, &mut rng::stream(seed, &[STREAM_SAMPLE, team, episode as u64, tag]));
    let mut urng = rng::stream(seed, &[STREAM_UPDATE, team, episode as u64, tag]);
    let losses = learner
        .update(&batch, &mut urng)
        .map_err(|e| (e, batch.iter().map(|t| (*t).clone()).collect()))?;
    learner.soft_update().map_err(|e| (e, Vec::new()))?;
    Ok(Some(losses))
}

#[derive(Deserialize)]
struct TimingEntry {
    episode: usize,
}

/// Opens a CSV log for appending, keeping only rows up to episode `kept`
/// from any previous run in the same directory.
fn open_log<R: for<'de> Deserialize<'de>>(
    path: &Path,
    kept: usize,
    episode: impl Fn(&R) -> usize,
) -> Result<csv::Writer<fs::File>, TrainerError> {
    let mut keep = Vec::new();
    if kept > 0 && path.exists() {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        keep.push(headers.clone());
        for record in reader.records() {
            let record = record?;
            let row: R = record.deserialize(Some(&headers))?;
            if episode(&row) <= kept {
                keep.push(record);
            }
        }
    }
    let file = fs::File::create(path).map_err(TrainerError::file(path))?;
    let fresh = keep.is_empty();
    let mut writer = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for record in &keep {
        writer.write_record(record)?;
    }
    Ok(writer)
}
