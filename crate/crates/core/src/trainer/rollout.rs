//! Stepping a world under two team controllers: observation, recurrent
//! encoding, action choice and the per-agent mean actions that condition the
//! next step.

use rand::Rng;
use rayon::prelude::*;

use crate::engine::{ActionId, Observation, StepOutcome, World};
use crate::estimators::{
    dirichlet_mean, global_mean, masked_mean, DirichletState, MeanAction, Memory, NeighborActions, Star, StarBatch,
};
use crate::learners::{sample_action, Learner, LearnerKind};
use crate::nncore::{layers, Tensor};
use crate::rng;

use super::TrainerError;

/// Stream tags for [`rng::stream`].
pub const STREAM_ACT: u64 = 1;
pub const STREAM_MEAN: u64 = 2;
pub const STREAM_SAMPLE: u64 = 3;
pub const STREAM_UPDATE: u64 = 4;

/// Who picks a team's actions.
#[derive(Clone, Copy)]
pub enum Controller<'a> {
    /// Exploring (`greedy = false`) or argmax (`greedy = true`) learner.
    Learner { learner: &'a Learner, greedy: bool },
    /// Uniformly random actions.
    Uniform,
    /// A fixed rule `(world, agent id) → action`.
    Scripted(&'a (dyn Fn(&World, usize) -> ActionId + Sync)),
}

impl std::fmt::Debug for Controller<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Controller::Learner { learner, greedy } => {
                f.debug_struct("Learner").field("kind", &learner.kind()).field("greedy", greedy).finish()
            }
            Controller::Uniform => f.write_str("Uniform"),
            Controller::Scripted(_) => f.write_str("Scripted"),
        }
    }
}

/// What one agent saw and did at a step, enough to build its transition.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentStep {
    pub id: usize,
    pub obs: Vec<f64>,
    pub action: ActionId,
    /// Mean action computed from this step's neighbor actions.
    pub mean_action: Vec<f64>,
    pub neighbor_actions: Vec<ActionId>,
    /// Recurrent hidden rows of the agent and its neighbors (graph-attention
    /// learners only).
    pub hidden: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub actions: Vec<Option<ActionId>>,
    pub outcome: StepOutcome,
    /// Per team, the learner-controlled agents that acted.
    pub agents: [Vec<AgentStep>; 2],
}

#[derive(Clone, Debug)]
struct TeamSlot {
    memory: Option<Memory>,
    prev_means: Vec<MeanAction>,
}

/// One episode in progress. Controllers are passed to every
/// [`Rollout::step`] so learners can be updated between steps; they must
/// keep the learner kind they started with.
#[derive(Clone, Debug)]
pub struct Rollout {
    world: World,
    seed: u64,
    teams: [TeamSlot; 2],
    obs: Vec<Option<Observation>>,
}

fn check_compatible(world: &World, team: usize, controller: &Controller<'_>) -> Result<(), TrainerError> {
    if let Controller::Learner { learner, .. } = controller {
        let l = world.class(team as u8).n_actions();
        let f = world.obs_layout().feature_len();
        if learner.n_actions() != l || learner.feature_len() != f {
            return Err(TrainerError::Incompatible(format!(
                "team {team}: learner expects {} features and {} actions, scenario has {f} and {l}",
                learner.feature_len(),
                learner.n_actions(),
            )));
        }
    }
    Ok(())
}

impl Rollout {
    /// Starts from `world` as built (step 0) with zeroed recurrent state and
    /// uniform previous mean actions. `seed` keys every action and estimator
    /// stream together with the world's episode index.
    pub fn new(world: World, seed: u64, controllers: &[Controller<'_>; 2]) -> Result<Self, TrainerError> {
        let n = world.agents().len();
        let teams = [0usize, 1].map(|team| {
            let memory = match controllers[team] {
                Controller::Learner { learner, .. } => learner.graph_attention().map(|g| Memory::zeros(n, g.hidden)),
                _ => None,
            };
            TeamSlot { memory, prev_means: vec![MeanAction::uniform(world.class(team as u8).n_actions()); n] }
        });
        for (team, c) in controllers.iter().enumerate() {
            check_compatible(&world, team, c)?;
        }
        let mut rollout = Rollout { world, seed, teams, obs: Vec::new() };
        rollout.refresh_observations()?;
        Ok(rollout)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn into_world(self) -> World {
        self.world
    }

    /// Current observation of a living agent.
    pub fn observation(&self, id: usize) -> Option<&Observation> {
        self.obs.get(id).and_then(Option::as_ref)
    }

    /// The mean action agent `id` will act on at the next step.
    pub fn prev_mean(&self, id: usize) -> Option<&MeanAction> {
        let team = self.world.agents().get(id)?.team;
        self.teams[usize::from(team)].prev_means.get(id)
    }

    fn refresh_observations(&mut self) -> Result<(), TrainerError> {
        let world = &self.world;
        self.obs = world
            .agents()
            .par_iter()
            .map(|a| if a.alive { world.observe(a.id).map(Some) } else { Ok(None) })
            .collect::<Result<_, _>>()?;
        Ok(())
    }

    fn obs_tensor(&self, ids: &[usize]) -> Result<Tensor, TrainerError> {
        let f = self.world.obs_layout().feature_len();
        let mut data = Vec::with_capacity(ids.len() * f);
        for &id in ids {
            data.extend_from_slice(&self.obs[id].as_ref().expect("living agent").features);
        }
        Ok(Tensor::from_vec(ids.len(), f, data)?)
    }

    /// Advances one step with exploration rates `epsilon` per team.
    pub fn step(&mut self, controllers: &[Controller<'_>; 2], epsilon: [f64; 2]) -> Result<StepRecord, TrainerError> {
        for (team, c) in controllers.iter().enumerate() {
            check_compatible(&self.world, team, c)?;
            let wants_memory = matches!(c, Controller::Learner { learner, .. } if learner.graph_attention().is_some());
            if wants_memory != self.teams[team].memory.is_some() {
                return Err(TrainerError::Incompatible(format!("team {team} changed controller mid-episode")));
            }
        }
        let episode = self.world.episode();
        let t = self.world.step_index() as u64;
        let seed = self.seed;
        let living: Vec<usize> = self.world.agents().iter().filter(|a| a.alive).map(|a| a.id).collect();
        let by_team: [Vec<usize>; 2] = [0u8, 1].map(|team| {
            living.iter().copied().filter(|&id| self.world.agents()[id].team == team).collect()
        });

        if self.teams.iter().any(|s| s.memory.is_some()) {
            let all = self.obs_tensor(&living)?;
            for (slot, controller) in self.teams.iter_mut().zip(controllers) {
                if let (Some(memory), Controller::Learner { learner, .. }) = (&mut slot.memory, controller) {
                    let gat = learner.graph_attention().expect("memory implies graph attention");
                    gat.encode(learner.critic(), &all, &living, memory)?;
                }
            }
        }

        let mut actions: Vec<Option<ActionId>> = vec![None; self.world.agents().len()];
        for (team, ids) in by_team.iter().enumerate() {
            let n_actions = self.world.class(team as u8).n_actions();
            let chosen: Vec<ActionId> = match controllers[team] {
                Controller::Learner { learner, greedy } => {
                    let obs = self.obs_tensor(ids)?;
                    let mut means = Vec::with_capacity(ids.len() * n_actions);
                    for &id in ids {
                        means.extend_from_slice(self.teams[team].prev_means[id].probs());
                    }
                    let means = Tensor::from_vec(ids.len(), n_actions, means)?;
                    if greedy {
                        learner.greedy(&obs, &means)?
                    } else {
                        let p = learner.policy(&obs, &means)?;
                        let eps = epsilon[team];
                        ids.par_iter()
                            .enumerate()
                            .map(|(r, &id)| {
                                let mut g = rng::stream(seed, &[STREAM_ACT, episode, t, id as u64]);
                                sample_action(p.row_slice(r), eps, &mut g)
                            })
                            .collect()
                    }
                }
                Controller::Uniform => ids
                    .par_iter()
                    .map(|&id| rng::stream(seed, &[STREAM_ACT, episode, t, id as u64]).random_range(0..n_actions))
                    .collect(),
                Controller::Scripted(rule) => ids.iter().map(|&id| rule(&self.world, id)).collect(),
            };
            for (&id, a) in ids.iter().zip(chosen) {
                actions[id] = Some(a);
            }
        }

        let mut agents: [Vec<AgentStep>; 2] = [Vec::new(), Vec::new()];
        for (team, ids) in by_team.iter().enumerate() {
            if let Controller::Learner { learner, .. } = controllers[team] {
                let steps = self.mean_actions(learner, team, ids, &actions, episode, t)?;
                for s in &steps {
                    self.teams[team].prev_means[s.id] = MeanAction::new(s.mean_action.clone())?;
                }
                agents[team] = steps;
            }
        }

        let outcome = self.world.step(&actions)?;
        self.refresh_observations()?;
        Ok(StepRecord { actions, outcome, agents })
    }

    fn mean_actions(
        &self,
        learner: &Learner,
        team: usize,
        ids: &[usize],
        actions: &[Option<ActionId>],
        episode: u64,
        t: u64,
    ) -> Result<Vec<AgentStep>, TrainerError> {
        let seed = self.seed;
        let n_actions = learner.n_actions();
        let neighborhoods: Vec<NeighborActions> = ids
            .iter()
            .map(|&id| {
                let entries: Vec<(usize, ActionId)> = self.obs[id]
                    .as_ref()
                    .expect("living agent")
                    .neighbors
                    .iter()
                    .map(|&n| (n, actions[n].expect("visible neighbors are alive")))
                    .collect();
                NeighborActions::from_actions(n_actions, &entries)
            })
            .collect::<Result<_, _>>()?;

        let (means, hidden): (Vec<MeanAction>, Vec<Vec<f64>>) = match learner.kind() {
            LearnerKind::Mfq | LearnerKind::Mfac => {
                (neighborhoods.iter().map(global_mean).collect(), vec![Vec::new(); ids.len()])
            }
            LearnerKind::PomfqFor => {
                let hyper = learner.hyper();
                let means = ids
                    .par_iter()
                    .zip(&neighborhoods)
                    .map(|(&id, na)| {
                        let state = DirichletState::from_neighbors(na, hyper.dirichlet_eta, hyper.dirichlet_samples);
                        dirichlet_mean(&state, &mut rng::stream(seed, &[STREAM_MEAN, episode, t, id as u64]))
                    })
                    .collect::<Result<_, _>>()?;
                (means, vec![Vec::new(); ids.len()])
            }
            LearnerKind::Gamfq => {
                let memory = self.teams[team].memory.as_ref().expect("graph-attention memory");
                let gat = learner.graph_attention().expect("graph attention");
                let stars: Vec<Star> = ids
                    .iter()
                    .zip(&neighborhoods)
                    .map(|(&id, na)| Star { center: id, leaves: na.entries().iter().map(|&(n, _)| n).collect() })
                    .collect();
                let noise_rows: Vec<Tensor> = ids
                    .par_iter()
                    .zip(&stars)
                    .map(|(&id, star)| {
                        let mut g = rng::stream(seed, &[STREAM_MEAN, episode, t, id as u64]);
                        layers::gumbel_noise(star.leaves.len(), 2, &mut g)
                    })
                    .collect();
                let noise: Vec<f64> = noise_rows.into_iter().flat_map(Tensor::into_vec).collect();
                let hidden: Vec<Vec<f64>> = stars
                    .iter()
                    .map(|s| {
                        std::iter::once(s.center)
                            .chain(s.leaves.iter().copied())
                            .flat_map(|r| memory.h.row_slice(r).iter().copied())
                            .collect()
                    })
                    .collect();
                let batch = StarBatch::new(stars);
                let noise = Tensor::from_vec(batch.n_edges(), 2, noise)?;
                let masks = gat.select_with_noise(learner.critic(), &memory.h, &batch, noise)?;
                let means = masks
                    .iter()
                    .zip(&neighborhoods)
                    .map(|(m, na)| masked_mean(m, na))
                    .collect::<Result<_, _>>()?;
                (means, hidden)
            }
        };

        Ok(ids
            .iter()
            .zip(neighborhoods)
            .zip(means.into_iter().zip(hidden))
            .map(|((&id, na), (mean, hidden))| AgentStep {
                id,
                obs: self.obs[id].as_ref().expect("living agent").features.clone(),
                action: actions[id].expect("acted"),
                mean_action: mean.into_vec(),
                neighbor_actions: na.actions().collect(),
                hidden,
            })
            .collect())
    }
}
