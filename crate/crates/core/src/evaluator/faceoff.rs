//! Greedy faceoffs between trained teams, and round-robin tournaments.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{ReplayWriter, ScenarioSpec, Winner, World};
use crate::learners::Learner;
use crate::nncore::Checkpoint;
use crate::rng;
use crate::trainer::{team_label, Controller, Rollout};

use super::elo::{elo_update, Outcome, Rating};
use super::stats::std_dev;
use super::EvalError;

pub const DEFAULT_ROUNDS: usize = 1000;
pub const BOOTSTRAP_RESAMPLES: usize = 10;
const STREAM_BOOTSTRAP: u64 = 11;

/// An algorithm's two trained teams: `a` plays team 0, `b` team 1.
#[derive(Clone, Debug)]
pub struct CheckpointPair {
    pub name: String,
    pub a: Learner,
    pub b: Learner,
}

impl CheckpointPair {
    pub fn new(name: impl Into<String>, a: Learner, b: Learner) -> Self {
        CheckpointPair { name: name.into(), a, b }
    }

    /// Loads `path` and its sibling for the other team: for
    /// `<alg>_a_<episode>.ckpt` the sibling is `<alg>_b_<episode>.ckpt` and
    /// vice versa. Both checkpoints must belong to `spec`.
    pub fn load(path: &Path, spec: &ScenarioSpec) -> Result<Self, EvalError> {
        let (team, sibling) = sibling_path(path)?;
        let load = |p: &Path| -> Result<Learner, EvalError> {
            let ckpt = Checkpoint::load(p).map_err(|e| EvalError::Checkpoint(format!("{}: {e}", p.display())))?;
            let expected = spec.hash();
            if ckpt.header.scenario_hash != expected {
                return Err(EvalError::ScenarioMismatch { path: p.to_path_buf(), expected, found: ckpt.header.scenario_hash });
            }
            Ok(Learner::from_checkpoint(&ckpt)?)
        };
        let mine = load(path)?;
        let other = load(&sibling)?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.split('_').next().map(|k| k.to_string()))
            .unwrap_or_else(|| mine.kind().to_string());
        let name = if name == "pomfq" { "pomfq_for".to_string() } else { name };
        Ok(if team == 0 { CheckpointPair::new(name, mine, other) } else { CheckpointPair::new(name, other, mine) })
    }

    fn learner(&self, team: usize) -> &Learner {
        if team == 0 {
            &self.a
        } else {
            &self.b
        }
    }
}

/// The team (0 or 1) a checkpoint path belongs to, and the path of the other
/// team's checkpoint.
pub fn sibling_path(path: &Path) -> Result<(usize, PathBuf), EvalError> {
    let bad = || EvalError::Plan(format!("{} is not named <alg>_<a|b>_<episode>.ckpt", path.display()));
    let stem = path.file_stem().and_then(|s| s.to_str()).ok_or_else(bad)?;
    let mut parts: Vec<&str> = stem.rsplitn(3, '_').collect();
    if parts.len() != 3 || parts[0].parse::<u64>().is_err() {
        return Err(bad());
    }
    let team = match parts[1] {
        "a" => 0,
        "b" => 1,
        _ => return Err(bad()),
    };
    let other = team_label(1 - team).to_string();
    parts[1] = &other;
    let name = format!("{}_{}_{}.ckpt", parts[2], parts[1], parts[0]);
    Ok((team, path.with_file_name(name)))
}

/// One participant of a faceoff.
#[derive(Clone, Copy)]
pub enum Side<'a> {
    Trained(&'a CheckpointPair),
    Uniform,
    Scripted(&'a (dyn Fn(&World, usize) -> usize + Sync)),
}

impl<'a> Side<'a> {
    /// Greedy controller for `team`.
    pub fn controller(self, team: usize) -> Controller<'a> {
        match self {
            Side::Trained(pair) => Controller::Learner { learner: pair.learner(team), greedy: true },
            Side::Uniform => Controller::Uniform,
            Side::Scripted(rule) => Controller::Scripted(rule),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Side::Trained(pair) => pair.name.clone(),
            Side::Uniform => "random".into(),
            Side::Scripted(_) => "scripted".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceoffPlan {
    pub scenario: ScenarioSpec,
    /// Even; the second half swaps which participant plays team 0.
    pub rounds: usize,
    pub seed_base: u64,
    pub workers: usize,
}

impl FaceoffPlan {
    pub fn new(scenario: ScenarioSpec, rounds: usize, seed_base: u64) -> Self {
        FaceoffPlan { scenario, rounds, seed_base, workers: 1 }
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.rounds == 0 || self.rounds % 2 != 0 {
            return Err(EvalError::Plan(format!("rounds must be even and positive, got {}", self.rounds)));
        }
        if self.workers == 0 {
            return Err(EvalError::Plan("workers must be positive".into()));
        }
        self.scenario.validate()?;
        Ok(())
    }
}

/// One round: who played team 0, who won.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Whether the first participant played team 0.
    pub first_is_team_a: bool,
    pub winner: Winner,
    /// From the first participant's point of view.
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceoffResult {
    pub first: String,
    pub second: String,
    pub wins: usize,
    pub draws: usize,
    pub losses: usize,
    pub rounds: Vec<RoundRecord>,
    /// First participant's wins over rounds.
    pub win_rate: f64,
    pub half_win_rates: [f64; 2],
    /// Standard deviation of the two half win rates.
    pub half_std: f64,
    /// Standard deviation of the win rate over bootstrap resamples.
    pub bootstrap_std: f64,
    /// Ratings after a sequential pass over the rounds from 1000 each.
    pub ratings: [Rating; 2],
}

/// Plays one greedy episode on `World::with_seed(spec, seed, episode)` and
/// returns the finished world. With `log`, every step is appended to it.
pub fn play_episode<W: Write>(
    spec: &ScenarioSpec,
    seed: u64,
    episode: u64,
    controllers: &[Controller<'_>; 2],
    log: Option<&mut ReplayWriter<W>>,
) -> Result<World, EvalError> {
    let world = World::with_seed(spec, seed, episode)?;
    let mut rollout = Rollout::new(world, seed, controllers)?;
    let mut log = log;
    while !rollout.world().is_terminal() {
        let record = rollout.step(controllers, [0.0; 2])?;
        if let Some(w) = log.as_deref_mut() {
            w.record(rollout.world(), &record.actions, &record.outcome)?;
        }
    }
    Ok(rollout.into_world())
}

/// Plays `plan.rounds` rounds, the first half with `first` on team 0 and
/// `second` on team 1, the second half swapped. Round `r` runs on
/// `World::with_seed(scenario, seed_base, r)`.
pub fn faceoff(plan: &FaceoffPlan, first: Side<'_>, second: Side<'_>) -> Result<FaceoffResult, EvalError> {
    plan.validate()?;
    let half = plan.rounds / 2;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| EvalError::Plan(e.to_string()))?;
    let rounds: Vec<RoundRecord> = pool.install(|| {
        (0..plan.rounds)
            .into_par_iter()
            .map(|round| {
                let first_is_team_a = round < half;
                let controllers = if first_is_team_a {
                    [first.controller(0), second.controller(1)]
                } else {
                    [second.controller(0), first.controller(1)]
                };
                let world = play_episode::<std::io::Sink>(&plan.scenario, plan.seed_base, round as u64, &controllers, None)?;
                let winner = world.winner()?;
                let first_team = if first_is_team_a { 0 } else { 1 };
                let outcome = match winner {
                    Winner::Draw => Outcome::Draw,
                    Winner::Team(t) if usize::from(t) == first_team => Outcome::Win,
                    Winner::Team(_) => Outcome::Loss,
                };
                Ok(RoundRecord { round, first_is_team_a, winner, outcome })
            })
            .collect::<Result<_, EvalError>>()
    })?;
    Ok(summarize(plan, first.name(), second.name(), rounds))
}

fn summarize(plan: &FaceoffPlan, first: String, second: String, rounds: Vec<RoundRecord>) -> FaceoffResult {
    let count = |o: Outcome, rs: &[RoundRecord]| rs.iter().filter(|r| r.outcome == o).count();
    let wins = count(Outcome::Win, &rounds);
    let rate = |rs: &[RoundRecord]| count(Outcome::Win, rs) as f64 / rs.len() as f64;
    let half = rounds.len() / 2;
    let half_win_rates = [rate(&rounds[..half]), rate(&rounds[half..])];
    let mut boot = rng::stream(plan.seed_base, &[STREAM_BOOTSTRAP]);
    let resampled: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let n = rounds.len();
            (0..n).filter(|_| rounds[boot.random_range(0..n)].outcome == Outcome::Win).count() as f64 / n as f64
        })
        .collect();
    let mut ratings = [Rating::default(); 2];
    for r in &rounds {
        let (a, b) = elo_update(ratings[0], ratings[1], r.outcome);
        ratings = [a, b];
    }
    FaceoffResult {
        first,
        second,
        wins,
        draws: count(Outcome::Draw, &rounds),
        losses: count(Outcome::Loss, &rounds),
        win_rate: wins as f64 / rounds.len() as f64,
        half_win_rates,
        half_std: std_dev(&half_win_rates),
        bootstrap_std: std_dev(&resampled),
        rounds,
        ratings,
    }
}

/// Faceoffs for every unordered pair plus a sequential rating pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TournamentResult {
    pub names: Vec<String>,
    /// Pairs `(i, j)` with `i < j`, in lexicographic order.
    pub faceoffs: Vec<((usize, usize), FaceoffResult)>,
    /// `win_matrix[i][j]`: win rate of `i` against `j`.
    pub win_matrix: Vec<Vec<Option<f64>>>,
    /// Ratings after replaying every round of every faceoff in order.
    pub ratings: Vec<Rating>,
}

pub fn tournament(plan: &FaceoffPlan, entries: &[Side<'_>]) -> Result<TournamentResult, EvalError> {
    if entries.len() < 2 {
        return Err(EvalError::Plan("a tournament needs at least two participants".into()));
    }
    let n = entries.len();
    let mut faceoffs = Vec::with_capacity(n * (n - 1) / 2);
    let mut win_matrix = vec![vec![None; n]; n];
    let mut ratings = vec![Rating::default(); n];
    for i in 0..n {
        for j in i + 1..n {
            let result = faceoff(plan, entries[i], entries[j])?;
            win_matrix[i][j] = Some(result.win_rate);
            win_matrix[j][i] = Some(result.losses as f64 / result.rounds.len() as f64);
            for r in &result.rounds {
                let (a, b) = elo_update(ratings[i], ratings[j], r.outcome);
                ratings[i] = a;
                ratings[j] = b;
            }
            faceoffs.push(((i, j), result));
        }
    }
    Ok(TournamentResult { names: entries.iter().map(Side::name).collect(), faceoffs, win_matrix, ratings })
}

impl TournamentResult {
    /// `algorithm1,algorithm2,score1,score2,wins1,draws,wins2`, one row per
    /// faceoff, scores from that faceoff's own rating pass.
    pub fn pairs_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["algorithm1", "algorithm2", "score1", "score2", "wins1", "draws", "wins2"])?;
        for ((i, j), r) in &self.faceoffs {
            w.write_record([
                self.names[*i].clone(),
                self.names[*j].clone(),
                r.ratings[0].rating.to_string(),
                r.ratings[1].rating.to_string(),
                r.wins.to_string(),
                r.draws.to_string(),
                r.losses.to_string(),
            ])?;
        }
        csv_string(w)
    }

    /// `algorithm,rating,games`.
    pub fn ratings_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["algorithm", "rating", "games"])?;
        for (name, r) in self.names.iter().zip(&self.ratings) {
            w.write_record([name.clone(), r.rating.to_string(), r.games.to_string()])?;
        }
        csv_string(w)
    }
}

pub(crate) fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String, EvalError> {
    let bytes = w.into_inner().map_err(|e| EvalError::Plan(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
