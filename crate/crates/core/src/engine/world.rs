//! World state, placement, the step function and win rules.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{Action, ActionId, AgentClass, ClassKind, ScenarioKind, ScenarioSpec};
use super::EngineError;

const EMPTY: u32 = u32::MAX;
/// Rejection-sampling attempts per agent (and per food cell) at reset.
pub const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub team: u8,
    pub alive: bool,
    /// Anchor (top-left) cell of the footprint.
    pub x: i32,
    pub y: i32,
    pub hp: i32,
    pub last_action: Option<ActionId>,
}

/// Everything that changes during an episode. Serializing it captures the
/// full simulation, RNG position included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub step_index: usize,
    pub agents: Vec<AgentState>,
    occupancy: Vec<u32>,
    food: Vec<bool>,
    rng: ChaCha8Rng,
    pub cumulative_team_reward: [f64; 2],
    pub terminal: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalCause {
    TimeLimit,
    TeamEliminated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Indexed by agent id; zero for agents dead at the start of the step.
    pub rewards: Vec<f64>,
    /// One `(attacker, victim)` entry per attacker credited with a kill.
    pub kills: Vec<(usize, usize)>,
    /// Agents that died this step, ascending.
    pub deaths: Vec<usize>,
    pub terminal: bool,
    pub terminal_cause: Option<TerminalCause>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Team(u8),
    Draw,
}

#[derive(Clone, Debug)]
pub struct World {
    spec: ScenarioSpec,
    classes: [AgentClass; 2],
    seed: u64,
    episode: u64,
    state: WorldState,
}

impl World {
    /// Resets using the scenario's own seed, episode 0.
    pub fn build(spec: &ScenarioSpec) -> Result<Self, EngineError> {
        Self::with_seed(spec, spec.rng_seed, 0)
    }

    /// Resets with an explicit seed; `episode` selects an independent stream
    /// of that seed.
    pub fn with_seed(spec: &ScenarioSpec, seed: u64, episode: u64) -> Result<Self, EngineError> {
        spec.validate()?;
        let classes = [spec.class(0), spec.class(1)];
        let (w, h) = (spec.map_width, spec.map_height);
        let area: i64 = spec
            .teams
            .iter()
            .map(|t| t.count as i64 * i64::from(classes[usize::from(t.team_id)].footprint_side.pow(2)))
            .sum();
        let cells = i64::from(w) * i64::from(h);
        if 2 * area > cells {
            return Err(EngineError::Placement(format!(
                "{area} footprint cells requested on a {cells}-cell map (limit 50%)"
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(episode);
        let mut state = WorldState {
            step_index: 0,
            agents: Vec::with_capacity(spec.n_agents()),
            occupancy: vec![EMPTY; (w * h) as usize],
            food: vec![false; (w * h) as usize],
            rng,
            cumulative_team_reward: [0.0; 2],
            terminal: false,
        };

        let split = spec.kind != ScenarioKind::PredatorPrey;
        for team in &spec.teams {
            let class = &classes[usize::from(team.team_id)];
            let side = class.footprint_side;
            let (x_lo, x_hi) = match (split, team.team_id) {
                (false, _) => (0, w - side),
                (true, 0) => (0, w / 2 - side),
                (true, _) => (w / 2, w - side),
            };
            for _ in 0..team.count {
                let id = state.agents.len();
                let mut placed = false;
                for _ in 0..PLACEMENT_ATTEMPTS {
                    let x = state.rng.random_range(x_lo..=x_hi);
                    let y = state.rng.random_range(0..=h - side);
                    if footprint_free(&state.occupancy, w, x, y, side, None) {
                        fill(&mut state.occupancy, w, x, y, side, id as u32);
                        state.agents.push(AgentState {
                            id,
                            team: team.team_id,
                            alive: true,
                            x,
                            y,
                            hp: class.max_hp,
                            last_action: None,
                        });
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    return Err(EngineError::Placement(format!(
                        "could not place agent {id} after {PLACEMENT_ATTEMPTS} attempts"
                    )));
                }
            }
        }

        if spec.kind == ScenarioKind::Gathering {
            for k in 0..spec.food_count {
                let mut placed = false;
                for _ in 0..PLACEMENT_ATTEMPTS {
                    let cell = state.rng.random_range(0..(w * h) as usize);
                    if state.occupancy[cell] == EMPTY && !state.food[cell] {
                        state.food[cell] = true;
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    return Err(EngineError::Placement(format!("could not place food cell {k}")));
                }
            }
        }

        Ok(World { spec: spec.clone(), classes, seed, episode, state })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.state.agents
    }

    pub fn agent(&self, id: usize) -> Result<&AgentState, EngineError> {
        self.state.agents.get(id).ok_or(EngineError::UnknownAgent(id))
    }

    pub fn class(&self, team: u8) -> &AgentClass {
        &self.classes[usize::from(team)]
    }

    pub fn class_of(&self, id: usize) -> &AgentClass {
        self.class(self.state.agents[id].team)
    }

    /// Action-table size; identical for every class.
    pub fn n_actions(&self) -> usize {
        self.classes[0].n_actions()
    }

    pub fn step_index(&self) -> usize {
        self.state.step_index
    }

    pub fn is_terminal(&self) -> bool {
        self.state.terminal
    }

    pub fn survivors(&self) -> [usize; 2] {
        let mut s = [0; 2];
        for a in self.state.agents.iter().filter(|a| a.alive) {
            s[usize::from(a.team)] += 1;
        }
        s
    }

    pub fn food_cells(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        let w = self.spec.map_width;
        self.state
            .food
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(move |(i, _)| (i as i32 % w, i as i32 / w))
    }

    /// Agent id occupying a cell, if any.
    pub fn occupant(&self, x: i32, y: i32) -> Option<usize> {
        if !self.in_bounds(x, y) {
            return None;
        }
        let o = self.state.occupancy[(y * self.spec.map_width + x) as usize];
        (o != EMPTY).then_some(o as usize)
    }

    fn in_bounds(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && x < self.spec.map_width && y < self.spec.map_height
    }

    /// Advances one step. `actions` is indexed by agent id; living agents
    /// must have `Some`, entries of dead agents are ignored.
    pub fn step(&mut self, actions: &[Option<ActionId>]) -> Result<StepOutcome, EngineError> {
        if self.state.terminal {
            return Err(EngineError::Terminated);
        }
        let n = self.state.agents.len();
        if actions.len() != n {
            return Err(EngineError::ActionCount { expected: n, got: actions.len() });
        }
        let mut decoded = vec![None; n];
        for a in self.state.agents.iter().filter(|a| a.alive) {
            let id = actions[a.id].ok_or(EngineError::MissingAction(a.id))?;
            let class = &self.classes[usize::from(a.team)];
            decoded[a.id] = Some(class.action(id).ok_or(EngineError::InvalidAction {
                agent: a.id,
                action: id,
                n_actions: class.n_actions(),
            })?);
        }

        let rewards_table = self.spec.rewards.clone();
        let w = self.spec.map_width;
        let mut rewards = vec![0.0; n];

        let mut order: Vec<usize> = self.state.agents.iter().filter(|a| a.alive).map(|a| a.id).collect();
        order.shuffle(&mut self.state.rng);
        for &id in &order {
            let Some(Action::Move { dx, dy }) = decoded[id] else { continue };
            rewards[id] += rewards_table.move_cost;
            if (dx, dy) == (0, 0) {
                continue;
            }
            let side = self.classes[usize::from(self.state.agents[id].team)].footprint_side;
            let (x, y) = (self.state.agents[id].x, self.state.agents[id].y);
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx + side > w || ny + side > self.spec.map_height {
                continue;
            }
            if footprint_free(&self.state.occupancy, w, nx, ny, side, Some(id as u32)) {
                fill(&mut self.state.occupancy, w, x, y, side, EMPTY);
                fill(&mut self.state.occupancy, w, nx, ny, side, id as u32);
                self.state.agents[id].x = nx;
                self.state.agents[id].y = ny;
            }
        }

        let mut damage = vec![0; n];
        let mut hitters: Vec<Vec<usize>> = vec![Vec::new(); n];
        for a in self.state.agents.iter().filter(|a| a.alive) {
            let Some(Action::Attack { dx, dy }) = decoded[a.id] else { continue };
            let class = &self.classes[usize::from(a.team)];
            let predator = class.kind == ClassKind::Predator;
            let target = self
                .occupant(a.x + dx, a.y + dy)
                .filter(|&v| self.state.agents[v].team != a.team);
            match target {
                Some(v) => {
                    rewards[a.id] += if predator { rewards_table.hit_prey_reward } else { rewards_table.attack_hit_reward };
                    rewards[v] += rewards_table.attacked_penalty;
                    damage[v] += class.attack_damage;
                    hitters[v].push(a.id);
                }
                None => {
                    rewards[a.id] += if predator { rewards_table.attack_space_cost } else { rewards_table.attack_empty_cost };
                }
            }
        }

        let mut kills = Vec::new();
        let mut deaths = Vec::new();
        for v in 0..n {
            if damage[v] == 0 {
                continue;
            }
            let agent = &mut self.state.agents[v];
            agent.hp = (agent.hp - damage[v]).max(0);
            if agent.hp == 0 {
                agent.alive = false;
                let (x, y) = (agent.x, agent.y);
                let side = self.classes[usize::from(agent.team)].footprint_side;
                fill(&mut self.state.occupancy, w, x, y, side, EMPTY);
                rewards[v] += rewards_table.death_penalty;
                deaths.push(v);
                for &k in &hitters[v] {
                    let predator = self.classes[usize::from(self.state.agents[k].team)].kind == ClassKind::Predator;
                    rewards[k] += if predator { rewards_table.kill_prey_reward } else { rewards_table.kill_reward };
                    kills.push((k, v));
                }
            }
        }

        if self.spec.kind == ScenarioKind::Gathering {
            for a in self.state.agents.iter().filter(|a| a.alive) {
                let side = self.classes[usize::from(a.team)].footprint_side;
                for cy in a.y..a.y + side {
                    for cx in a.x..a.x + side {
                        let cell = (cy * w + cx) as usize;
                        if self.state.food[cell] {
                            self.state.food[cell] = false;
                            rewards[a.id] += rewards_table.food_reward;
                        }
                    }
                }
            }
        }

        for (id, action) in actions.iter().enumerate() {
            if decoded[id].is_some() {
                self.state.agents[id].last_action = *action;
            }
        }
        for a in &self.state.agents {
            self.state.cumulative_team_reward[usize::from(a.team)] += rewards[a.id];
        }
        self.state.step_index += 1;
        let survivors = self.survivors();
        let terminal_cause = if survivors.contains(&0) {
            Some(TerminalCause::TeamEliminated)
        } else if self.state.step_index == self.spec.episode_length {
            Some(TerminalCause::TimeLimit)
        } else {
            None
        };
        self.state.terminal = terminal_cause.is_some();
        Ok(StepOutcome { rewards, kills, deaths, terminal: self.state.terminal, terminal_cause })
    }

    /// Outcome of a finished episode. More survivors wins; battle scenarios
    /// break ties on cumulative team reward, predator-prey ties are draws.
    pub fn winner(&self) -> Result<Winner, EngineError> {
        if !self.state.terminal {
            return Err(EngineError::NotTerminal);
        }
        let [s0, s1] = self.survivors();
        if s0 != s1 {
            return Ok(Winner::Team(if s0 > s1 { 0 } else { 1 }));
        }
        if self.spec.kind == ScenarioKind::PredatorPrey {
            return Ok(Winner::Draw);
        }
        let [r0, r1] = self.state.cumulative_team_reward;
        Ok(if r0 > r1 {
            Winner::Team(0)
        } else if r1 > r0 {
            Winner::Team(1)
        } else {
            Winner::Draw
        })
    }

    /// Replaces the state wholesale; used to set up hand-built positions.
    pub fn set_state(&mut self, state: WorldState) -> Result<(), EngineError> {
        let w = self.spec.map_width;
        let mut occ = vec![EMPTY; state.occupancy.len()];
        for a in state.agents.iter().filter(|a| a.alive) {
            let class = &self.classes[usize::from(a.team)];
            let side = class.footprint_side;
            if a.hp <= 0 || a.hp > class.max_hp {
                return Err(EngineError::InvalidState(format!("agent {} has hp {}", a.id, a.hp)));
            }
            if a.x < 0 || a.y < 0 || a.x + side > w || a.y + side > self.spec.map_height {
                return Err(EngineError::InvalidState(format!("agent {} leaves the map", a.id)));
            }
            if !footprint_free(&occ, w, a.x, a.y, side, None) {
                return Err(EngineError::InvalidState(format!("agent {} overlaps another agent", a.id)));
            }
            fill(&mut occ, w, a.x, a.y, side, a.id as u32);
        }
        self.state = WorldState { occupancy: occ, ..state };
        Ok(())
    }

    /// Repositions every agent: `layout[id] = (x, y, hp)`, where `hp = 0`
    /// marks the agent dead. Occupancy is rebuilt from scratch.
    pub fn arrange(&mut self, layout: &[(i32, i32, i32)]) -> Result<(), EngineError> {
        if layout.len() != self.state.agents.len() {
            return Err(EngineError::InvalidState(format!(
                "layout has {} entries for {} agents",
                layout.len(),
                self.state.agents.len()
            )));
        }
        let mut state = self.state.clone();
        for (a, &(x, y, hp)) in state.agents.iter_mut().zip(layout) {
            a.x = x;
            a.y = y;
            a.hp = hp;
            a.alive = hp > 0;
        }
        self.set_state(state)
    }

    /// Places or removes food at a cell.
    pub fn set_food(&mut self, x: i32, y: i32, present: bool) {
        if self.in_bounds(x, y) {
            self.state.food[(y * self.spec.map_width + x) as usize] = present;
        }
    }

    /// Checks occupancy against the agents' footprints.
    pub fn check_invariants(&self) -> Result<(), EngineError> {
        let mut copy = self.clone();
        copy.set_state(self.state.clone())?;
        if copy.state.occupancy != self.state.occupancy {
            return Err(EngineError::InvalidState("occupancy differs from agent footprints".into()));
        }
        if self.state.step_index > self.spec.episode_length {
            return Err(EngineError::InvalidState("step index past episode length".into()));
        }
        Ok(())
    }
}

fn footprint_free(occ: &[u32], w: i32, x: i32, y: i32, side: i32, me: Option<u32>) -> bool {
    for cy in y..y + side {
        for cx in x..x + side {
            let o = occ[(cy * w + cx) as usize];
            if o != EMPTY && Some(o) != me {
                return false;
            }
        }
    }
    true
}

fn fill(occ: &mut [u32], w: i32, x: i32, y: i32, side: i32, value: u32) {
    for cy in y..y + side {
        for cx in x..x + side {
            occ[(cy * w + cx) as usize] = value;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::scenario::ClassKind;

    const STAY: ActionId = 0;

    fn duel(kind: ScenarioKind, classes: [ClassKind; 2]) -> World {
        let mut spec = ScenarioSpec::new(kind, [(classes[0], 1), (classes[1], 1)]);
        spec.map_width = 10;
        spec.map_height = 10;
        spec.food_count = 0;
        World::build(&spec).unwrap()
    }

    /// Index of the attack whose target cell is `(dx, dy)` from the anchor.
    fn attack_id(world: &World, team: u8, dx: i32, dy: i32) -> ActionId {
        let c = world.class(team);
        c.move_offsets.len() + c.attack_offsets.iter().position(|&o| o == (dx, dy)).unwrap()
    }

    #[test]
    fn default_multibattle_layout() {
        let w = World::build(&ScenarioSpec::multibattle()).unwrap();
        assert_eq!(w.survivors(), [25, 25]);
        assert!(w.agents().iter().all(|a| a.hp == 10));
        assert!(w.agents().iter().filter(|a| a.team == 0).all(|a| a.x + 2 <= 14));
        assert!(w.agents().iter().filter(|a| a.team == 1).all(|a| a.x >= 14));
        assert_eq!(w.food_cells().count(), 0);
        w.check_invariants().unwrap();
    }

    #[test]
    fn reset_is_deterministic() {
        let spec = ScenarioSpec::gathering();
        let a = World::build(&spec).unwrap();
        let b = World::build(&spec).unwrap();
        assert_eq!(a.state(), b.state());
        assert_eq!(a.food_cells().count(), 64);
        let c = World::with_seed(&spec, spec.rng_seed, 1).unwrap();
        assert_ne!(a.state().agents, c.state().agents);
    }

    #[test]
    fn overcrowded_spec_fails() {
        let spec = ScenarioSpec::new(ScenarioKind::Multibattle, [(ClassKind::Battle, 200), (ClassKind::Battle, 200)]);
        assert!(matches!(World::build(&spec), Err(EngineError::Placement(_))));
    }

    #[test]
    fn stay_costs_move_cost() {
        let mut w = duel(ScenarioKind::Multibattle, [ClassKind::Battle; 2]);
        w.arrange(&[(0, 0, 10), (7, 7, 10)]).unwrap();
        let out = w.step(&[Some(STAY), Some(STAY)]).unwrap();
        assert_eq!(out.rewards, vec![-0.005, -0.005]);
    }

    #[test]
    fn attack_empty_hit_and_kill() {
        let mut w = duel(ScenarioKind::Multibattle, [ClassKind::Battle; 2]);
        w.arrange(&[(2, 2, 10), (4, 2, 2)]).unwrap();
        let miss = attack_id(&w, 0, -1, 0);
        let out = w.step(&[Some(miss), Some(STAY)]).unwrap();
        assert_eq!(out.rewards[0], -0.1);

        let hit = attack_id(&w, 0, 2, 0);
        let out = w.step(&[Some(hit), Some(STAY)]).unwrap();
        assert_eq!(out.rewards[0], 0.2 + 200.0);
        assert_eq!(out.kills, vec![(0, 1)]);
        assert_eq!(out.deaths, vec![1]);
        assert!(out.terminal);
        assert_eq!(out.terminal_cause, Some(TerminalCause::TeamEliminated));
        assert_eq!(w.winner().unwrap(), Winner::Team(0));
        assert_eq!(w.occupant(4, 2), None);
    }

    #[test]
    fn predator_hits_prey() {
        let mut w = duel(ScenarioKind::PredatorPrey, [ClassKind::Predator, ClassKind::Prey]);
        w.arrange(&[(2, 2, 10), (4, 2, 2)]).unwrap();
        let hit = attack_id(&w, 0, 2, 0);
        let out = w.step(&[Some(hit), Some(STAY)]).unwrap();
        assert_eq!(out.rewards, vec![1.0, -1.0]);
        let out = w.step(&[Some(hit), Some(STAY)]).unwrap();
        assert_eq!(out.rewards, vec![1.0 + 100.0, -1.0 - 0.5]);
        let miss = attack_id(&w, 0, -1, -1);
        let mut w2 = duel(ScenarioKind::PredatorPrey, [ClassKind::Predator, ClassKind::Prey]);
        w2.arrange(&[(2, 2, 10), (8, 8, 2)]).unwrap();
        assert_eq!(w2.step(&[Some(miss), Some(STAY)]).unwrap().rewards[0], -0.3);
    }

    #[test]
    fn gathering_hit_reward_and_food() {
        let mut w = duel(ScenarioKind::Gathering, [ClassKind::Battle; 2]);
        w.arrange(&[(2, 2, 10), (4, 2, 10)]).unwrap();
        w.set_food(3, 3, true);
        let hit = attack_id(&w, 0, 2, 0);
        let out = w.step(&[Some(hit), Some(STAY)]).unwrap();
        assert_eq!(out.rewards[0], 5.0 + 5.0);
        assert_eq!(w.food_cells().count(), 0);
    }

    #[test]
    fn friendly_fire_is_off() {
        let mut spec = ScenarioSpec::new(ScenarioKind::Multibattle, [(ClassKind::Battle, 2), (ClassKind::Battle, 1)]);
        spec.map_width = 10;
        spec.map_height = 10;
        let mut w = World::build(&spec).unwrap();
        w.arrange(&[(0, 0, 10), (2, 0, 10), (8, 8, 10)]).unwrap();
        let a = attack_id(&w, 0, 2, 0);
        let out = w.step(&[Some(a), Some(STAY), Some(STAY)]).unwrap();
        assert_eq!(out.rewards[0], -0.1);
        assert_eq!(w.agents()[1].hp, 10);
    }

    #[test]
    fn race_for_a_cell_leaves_one_winner() {
        // Agents at (0,0) and (4,0) both try to land on (2,0).
        for seed in 0..32 {
            let mut spec = ScenarioSpec::new(ScenarioKind::Multibattle, [(ClassKind::Battle, 1), (ClassKind::Battle, 1)]);
            spec.map_width = 8;
            spec.map_height = 8;
            spec.rng_seed = seed;
            let mut w = World::build(&spec).unwrap();
            w.arrange(&[(0, 0, 10), (4, 0, 10)]).unwrap();
            let c = w.class(0);
            let right = c.move_offsets.iter().position(|&o| o == (2, 0)).unwrap();
            let left = c.move_offsets.iter().position(|&o| o == (-2, 0)).unwrap();
            let out = w.step(&[Some(right), Some(left)]).unwrap();
            assert_eq!(out.rewards, vec![-0.005, -0.005]);
            let moved: Vec<bool> = vec![w.agents()[0].x == 2, w.agents()[1].x == 2];
            assert_eq!(moved.iter().filter(|&&m| m).count(), 1);
            w.check_invariants().unwrap();
        }
    }

    #[test]
    fn kill_credit_goes_to_every_hitter() {
        let mut spec = ScenarioSpec::new(ScenarioKind::Multibattle, [(ClassKind::Battle, 2), (ClassKind::Battle, 1)]);
        spec.map_width = 10;
        spec.map_height = 10;
        let mut w = World::build(&spec).unwrap();
        w.arrange(&[(0, 2, 10), (4, 2, 10), (2, 2, 4)]).unwrap();
        let right = attack_id(&w, 0, 2, 0);
        let left = attack_id(&w, 0, -1, 0);
        let out = w.step(&[Some(right), Some(left), Some(STAY)]).unwrap();
        assert_eq!(out.kills, vec![(0, 2), (1, 2)]);
        assert_eq!(out.rewards[0], 200.2);
        assert_eq!(out.rewards[1], 200.2);
    }

    #[test]
    fn action_validation() {
        let mut w = duel(ScenarioKind::Multibattle, [ClassKind::Battle; 2]);
        assert!(matches!(w.step(&[Some(0)]), Err(EngineError::ActionCount { .. })));
        assert!(matches!(w.step(&[Some(0), None]), Err(EngineError::MissingAction(1))));
        assert!(matches!(w.step(&[Some(0), Some(21)]), Err(EngineError::InvalidAction { .. })));
        assert!(matches!(w.winner(), Err(EngineError::NotTerminal)));
    }

    #[test]
    fn time_limit_and_tie_breaks() {
        let mut spec = ScenarioSpec::new(ScenarioKind::Multibattle, [(ClassKind::Battle, 1), (ClassKind::Battle, 1)]);
        spec.map_width = 10;
        spec.map_height = 10;
        spec.episode_length = 2;
        let mut w = World::build(&spec).unwrap();
        w.arrange(&[(0, 0, 10), (8, 8, 10)]).unwrap();
        assert!(!w.step(&[Some(0), Some(0)]).unwrap().terminal);
        let out = w.step(&[Some(0), Some(13)]).unwrap();
        assert_eq!(out.terminal_cause, Some(TerminalCause::TimeLimit));
        assert_eq!(w.winner().unwrap(), Winner::Team(0));
        assert!(matches!(w.step(&[Some(0), Some(0)]), Err(EngineError::Terminated)));

        let mut state = w.state().clone();
        state.cumulative_team_reward = [10.0, 9.5];
        w.set_state(state.clone()).unwrap();
        assert_eq!(w.winner().unwrap(), Winner::Team(0));
        state.cumulative_team_reward = [1.0, 1.0];
        w.set_state(state).unwrap();
        assert_eq!(w.winner().unwrap(), Winner::Draw);
    }

    #[test]
    fn predator_prey_tie_is_draw() {
        let mut spec = ScenarioSpec::new(ScenarioKind::PredatorPrey, [(ClassKind::Predator, 1), (ClassKind::Prey, 1)]);
        spec.map_width = 10;
        spec.map_height = 10;
        spec.episode_length = 1;
        let mut w = World::build(&spec).unwrap();
        w.arrange(&[(0, 0, 10), (8, 8, 2)]).unwrap();
        w.step(&[Some(13), Some(0)]).unwrap();
        assert_eq!(w.winner().unwrap(), Winner::Draw);
    }

    #[test]
    fn survivors_count_decides() {
        let mut spec = ScenarioSpec::new(ScenarioKind::Multibattle, [(ClassKind::Battle, 3), (ClassKind::Battle, 1)]);
        spec.map_width = 12;
        spec.map_height = 12;
        spec.episode_length = 1;
        let mut w = World::build(&spec).unwrap();
        let mut state = w.state().clone();
        state.cumulative_team_reward = [-5.0, 100.0];
        w.set_state(state).unwrap();
        w.step(&[Some(0); 4]).unwrap();
        assert_eq!(w.winner().unwrap(), Winner::Team(0));
    }

    #[test]
    fn set_state_rejects_overlap() {
        let mut w = duel(ScenarioKind::Multibattle, [ClassKind::Battle; 2]);
        assert!(w.arrange(&[(0, 0, 10), (1, 1, 10)]).is_err());
        assert!(w.arrange(&[(0, 0, 10), (9, 9, 10)]).is_err());
        assert!(w.arrange(&[(0, 0, 10), (5, 5, 11)]).is_err());
        assert!(w.arrange(&[(0, 0, 10), (1, 1, 0)]).is_ok());
    }
}
