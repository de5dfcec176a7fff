//! How far the graph-attention mean action strays from the mean over the
//! whole population. Informational only.

use crate::engine::{ActionId, ScenarioSpec, World};
use crate::estimators::{global_mean, MeanAction, NeighborActions};
use crate::learners::LearnerKind;
use crate::trainer::{Controller, Rollout};

use super::stats::histogram;
use super::{csv_string, CheckpointPair, EvalError};

const HISTOGRAM_BINS: usize = 20;

/// One agent at one step.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct GapRow {
    pub episode: u64,
    pub step: usize,
    pub agent: usize,
    /// Observed neighbors `N_j`.
    pub n_neighbors: usize,
    /// Other living agents with the same action space.
    pub population: usize,
    /// `|ã − ā|∞`.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    /// `(lower bin edge, count)` over `[0, 1]`.
    pub histogram: Vec<(f64, usize)>,
}

impl GapReport {
    pub fn rows_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        csv_string(w)
    }

    pub fn histogram_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["gap_lower", "count"])?;
        for (edge, count) in &self.histogram {
            w.write_record([edge.to_string(), count.to_string()])?;
        }
        csv_string(w)
    }
}

/// `|estimate − mean(population)|∞`; zero for an empty population.
pub fn mean_action_gap(estimate: &MeanAction, population: &NeighborActions) -> f64 {
    if population.is_empty() {
        return 0.0;
    }
    estimate.linf(&global_mean(population))
}

/// Plays `episodes` greedy episodes with `pair` on both teams and reports,
/// for every acting GAMFQ agent and step, the gap between its attention mean
/// and the mean action of every other living agent sharing its action
/// space. With `explore`, actions are uniformly random instead of greedy.
pub fn mean_action_gap_report(
    pair: &CheckpointPair,
    spec: &ScenarioSpec,
    episodes: usize,
    seed: u64,
    explore: bool,
) -> Result<GapReport, EvalError> {
    for learner in [&pair.a, &pair.b] {
        if learner.kind() != LearnerKind::Gamfq {
            return Err(EvalError::Plan(format!("gap report needs GAMFQ learners, got {}", learner.kind())));
        }
    }
    let controllers = [
        Controller::Learner { learner: &pair.a, greedy: !explore },
        Controller::Learner { learner: &pair.b, greedy: !explore },
    ];
    let epsilon = if explore { [1.0; 2] } else { [0.0; 2] };
    let mut rows = Vec::new();
    for episode in 0..episodes as u64 {
        let world = World::with_seed(spec, seed, episode)?;
        let mut rollout = Rollout::new(world, seed, &controllers)?;
        while !rollout.world().is_terminal() {
            let step = rollout.world().step_index();
            let before = rollout.world().clone();
            let record = rollout.step(&controllers, epsilon)?;
            for agent in record.agents.iter().flatten() {
                let n_actions = agent.mean_action.len();
                let entries: Vec<(usize, ActionId)> = before
                    .agents()
                    .iter()
                    .filter(|o| o.alive && o.id != agent.id && before.class_of(o.id).n_actions() == n_actions)
                    .map(|o| (o.id, record.actions[o.id].expect("living agents act")))
                    .collect();
                let population = NeighborActions::from_actions(n_actions, &entries)?;
                let estimate = MeanAction::new(agent.mean_action.clone())?;
                rows.push(GapRow {
                    episode,
                    step,
                    agent: agent.id,
                    n_neighbors: agent.neighbor_actions.len(),
                    population: population.len(),
                    gap: mean_action_gap(&estimate, &population),
                });
            }
        }
    }
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    Ok(GapReport { histogram: histogram(&gaps, 0.0, 1.0, HISTOGRAM_BINS), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{ClassKind, ScenarioKind};
    use crate::estimators::{masked_mean, AdjacencyMask};
    use crate::learners::{Hyperparameters, Learner};
    use crate::rng;

    #[test]
    fn unanimous_population_has_no_gap() {
        let na = NeighborActions::from_actions(4, &[(1, 2), (2, 2), (3, 2)]).unwrap();
        let sub = NeighborActions::from_actions(4, &[(2, 2)]).unwrap();
        assert_eq!(mean_action_gap(&global_mean(&sub), &na), 0.0);
    }

    #[test]
    fn full_mask_over_everyone_has_no_gap() {
        let na = NeighborActions::from_actions(3, &[(1, 0), (2, 1), (5, 1), (7, 2)]).unwrap();
        let est = masked_mean(&AdjacencyMask::full(na.len()), &na).unwrap();
        assert_eq!(mean_action_gap(&est, &na), 0.0);
    }

    #[test]
    fn one_row_per_acting_agent_and_step() {
        let mut spec = ScenarioSpec::new(ScenarioKind::Multibattle, [(ClassKind::Battle, 3), (ClassKind::Battle, 3)]);
        spec.map_width = 12;
        spec.map_height = 12;
        spec.episode_length = 100;
        let world = World::build(&spec).unwrap();
        let f = world.obs_layout().feature_len();
        let l = world.n_actions();
        let hyper = Hyperparameters { hidden: 16, gat_hidden: 8, ..Hyperparameters::default() };
        let mut g = rng::stream(1, &[0]);
        let a = Learner::new(LearnerKind::Gamfq, f, l, hyper.clone(), &mut g).unwrap();
        let b = Learner::new(LearnerKind::Gamfq, f, l, hyper, &mut g).unwrap();
        let pair = CheckpointPair::new("gamfq", a, b);
        let report = mean_action_gap_report(&pair, &spec, 1, 3, true).unwrap();

        let mut living = 0;
        let mut w = World::with_seed(&spec, 3, 0).unwrap();
        let controllers = [Controller::Learner { learner: &pair.a, greedy: false }, Controller::Learner {
            learner: &pair.b,
            greedy: false,
        }];
        let mut rollout = Rollout::new(w.clone(), 3, &controllers).unwrap();
        while !rollout.world().is_terminal() {
            living += rollout.world().agents().iter().filter(|a| a.alive).count();
            rollout.step(&controllers, [1.0; 2]).unwrap();
        }
        w = rollout.into_world();
        assert!(w.step_index() > 0);
        assert_eq!(report.rows.len(), living);
        assert!(report.rows.iter().all(|r| (0.0..=1.0).contains(&r.gap)));
        assert_eq!(report.histogram.iter().map(|&(_, c)| c).sum::<usize>(), report.rows.len());
        assert!(report.rows_csv().unwrap().starts_with("episode,step,agent,n_neighbors,population,gap\n"));
    }
}
