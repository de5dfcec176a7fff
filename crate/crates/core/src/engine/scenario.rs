//! Scenario description: map, teams, agent classes and reward tables, plus
//! the TOML config format they are loaded from.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EngineError;

/// Index into an agent class's action table.
pub type ActionId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Multibattle,
    Gathering,
    PredatorPrey,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Multibattle => "multibattle",
            ScenarioKind::Gathering => "gathering",
            ScenarioKind::PredatorPrey => "predator_prey",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    Battle,
    Predator,
    Prey,
}

/// What a single action index does.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Move { dx: i32, dy: i32 },
    Attack { dx: i32, dy: i32 },
}

/// Body and action table shared by every agent of a team.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentClass {
    pub kind: ClassKind,
    pub footprint_side: i32,
    pub max_hp: i32,
    pub attack_damage: i32,
    pub move_offsets: Vec<(i32, i32)>,
    /// Relative to the footprint anchor (top-left cell).
    pub attack_offsets: Vec<(i32, i32)>,
}

/// Offsets admitted by `admit`, stay first, the rest in row-major order.
fn move_table(admit: impl Fn(i32, i32) -> bool, reach: i32) -> Vec<(i32, i32)> {
    let mut moves = vec![(0, 0)];
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if (dx, dy) != (0, 0) && admit(dx, dy) {
                moves.push((dx, dy));
            }
        }
    }
    moves
}

/// The eight cells ringing a 2×2 footprint's compass points.
const RING_ATTACKS: [(i32, i32); 8] = [(-1, -1), (0, -1), (2, -1), (-1, 0), (2, 0), (-1, 2), (0, 2), (2, 2)];

impl AgentClass {
    pub fn of(kind: ClassKind) -> Self {
        match kind {
            ClassKind::Battle | ClassKind::Predator => AgentClass {
                kind,
                footprint_side: 2,
                max_hp: 10,
                attack_damage: if kind == ClassKind::Battle { 2 } else { 1 },
                move_offsets: move_table(|dx, dy| dx.abs() + dy.abs() <= 2, 2),
                attack_offsets: RING_ATTACKS.to_vec(),
            },
            ClassKind::Prey => AgentClass {
                kind,
                footprint_side: 1,
                max_hp: 2,
                attack_damage: 0,
                move_offsets: move_table(|dx, dy| 4 * (dx * dx + dy * dy) <= 25, 2),
                attack_offsets: Vec::new(),
            },
        }
    }

    pub fn n_actions(&self) -> usize {
        self.move_offsets.len() + self.attack_offsets.len()
    }

    pub fn action(&self, id: ActionId) -> Option<Action> {
        let moves = self.move_offsets.len();
        if let Some(&(dx, dy)) = self.move_offsets.get(id) {
            Some(Action::Move { dx, dy })
        } else {
            self.attack_offsets
                .get(id.checked_sub(moves)?)
                .map(|&(dx, dy)| Action::Attack { dx, dy })
        }
    }

    /// Offset of the footprint center from its anchor.
    pub fn center_offset(&self) -> f64 {
        f64::from(self.footprint_side - 1) / 2.0
    }
}

/// Signed reward deltas. Predator-specific fields apply to attacks made by
/// predators; `attacked_penalty` and `death_penalty` apply to any victim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardTable {
    pub move_cost: f64,
    pub attack_empty_cost: f64,
    pub attack_hit_reward: f64,
    pub kill_reward: f64,
    pub food_reward: f64,
    pub attack_space_cost: f64,
    pub hit_prey_reward: f64,
    pub kill_prey_reward: f64,
    pub attacked_penalty: f64,
    pub death_penalty: f64,
}

impl RewardTable {
    pub fn defaults(kind: ScenarioKind) -> Self {
        let battle = RewardTable {
            move_cost: -0.005,
            attack_empty_cost: -0.1,
            attack_hit_reward: 0.2,
            kill_reward: 200.0,
            food_reward: 0.0,
            attack_space_cost: 0.0,
            hit_prey_reward: 0.0,
            kill_prey_reward: 0.0,
            attacked_penalty: 0.0,
            death_penalty: 0.0,
        };
        match kind {
            ScenarioKind::Multibattle => battle,
            ScenarioKind::Gathering => RewardTable {
                attack_hit_reward: 5.0,
                food_reward: 5.0,
                ..battle
            },
            ScenarioKind::PredatorPrey => RewardTable {
                move_cost: 0.0,
                attack_empty_cost: 0.0,
                attack_hit_reward: 0.0,
                kill_reward: 0.0,
                food_reward: 0.0,
                attack_space_cost: -0.3,
                hit_prey_reward: 1.0,
                kill_prey_reward: 100.0,
                attacked_penalty: -1.0,
                death_penalty: -0.5,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamSpec {
    pub team_id: u8,
    pub class: ClassKind,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub map_width: i32,
    pub map_height: i32,
    /// Exactly two teams, ids 0 and 1, in id order.
    pub teams: Vec<TeamSpec>,
    pub episode_length: usize,
    pub rewards: RewardTable,
    pub obs_radius: f64,
    pub max_visible_neighbors: usize,
    pub food_count: usize,
    pub rng_seed: u64,
}

pub const DEFAULT_MAP_SIDE: i32 = 28;
pub const DEFAULT_EPISODE_LENGTH: usize = 300;
pub const DEFAULT_OBS_RADIUS: f64 = 6.0;
pub const DEFAULT_MAX_NEIGHBORS: usize = 20;
pub const DEFAULT_FOOD_COUNT: usize = 64;
/// Food rows exposed in a gathering observation.
pub const VISIBLE_FOOD: usize = 8;

impl ScenarioSpec {
    /// The two-team setup with every other field at its default.
    pub fn new(kind: ScenarioKind, teams: [(ClassKind, usize); 2]) -> Self {
        ScenarioSpec {
            kind,
            map_width: DEFAULT_MAP_SIDE,
            map_height: DEFAULT_MAP_SIDE,
            teams: teams
                .iter()
                .enumerate()
                .map(|(i, &(class, count))| TeamSpec { team_id: i as u8, class, count })
                .collect(),
            episode_length: DEFAULT_EPISODE_LENGTH,
            rewards: RewardTable::defaults(kind),
            obs_radius: DEFAULT_OBS_RADIUS,
            max_visible_neighbors: DEFAULT_MAX_NEIGHBORS,
            food_count: if kind == ScenarioKind::Gathering { DEFAULT_FOOD_COUNT } else { 0 },
            rng_seed: 0,
        }
    }

    /// 25 vs 25 battle agents.
    pub fn multibattle() -> Self {
        Self::new(ScenarioKind::Multibattle, [(ClassKind::Battle, 25), (ClassKind::Battle, 25)])
    }

    pub fn gathering() -> Self {
        Self::new(ScenarioKind::Gathering, [(ClassKind::Battle, 25), (ClassKind::Battle, 25)])
    }

    /// 40 predators (team 0) and 20 prey (team 1).
    pub fn predator_prey() -> Self {
        Self::new(ScenarioKind::PredatorPrey, [(ClassKind::Predator, 40), (ClassKind::Prey, 20)])
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidSpec(m));
        if self.map_width < 8 || self.map_height < 8 {
            return bad(format!("map {}x{} is smaller than 8x8", self.map_width, self.map_height));
        }
        if self.episode_length == 0 {
            return bad("episode_length must be at least 1".into());
        }
        if !(self.obs_radius > 0.0 && self.obs_radius.is_finite()) {
            return bad(format!("obs_radius must be positive, got {}", self.obs_radius));
        }
        if self.teams.len() != 2 || self.teams.iter().enumerate().any(|(i, t)| usize::from(t.team_id) != i) {
            return bad("exactly two teams with ids 0 and 1 are required".into());
        }
        if self.teams.iter().any(|t| t.count == 0) {
            return bad("every team needs at least one agent".into());
        }
        let classes = (self.teams[0].class, self.teams[1].class);
        match self.kind {
            ScenarioKind::Multibattle | ScenarioKind::Gathering => {
                if classes != (ClassKind::Battle, ClassKind::Battle) {
                    return bad(format!("{} needs two battle teams", self.kind.as_str()));
                }
            }
            ScenarioKind::PredatorPrey => {
                let mut sorted = [classes.0, classes.1];
                sorted.sort_by_key(|c| *c as u8);
                if sorted != [ClassKind::Predator, ClassKind::Prey] {
                    return bad("predator_prey needs one predator team and one prey team".into());
                }
            }
        }
        if self.kind != ScenarioKind::Gathering && self.food_count != 0 {
            return bad("food_count is only meaningful for gathering".into());
        }
        let rewards = serde_json::to_value(&self.rewards).expect("reward table serializes");
        if let Some(obj) = rewards.as_object() {
            if let Some((k, _)) = obj.iter().find(|(_, v)| !v.as_f64().is_some_and(f64::is_finite)) {
                return bad(format!("reward `{k}` is not finite"));
            }
        }
        Ok(())
    }

    pub fn class(&self, team: u8) -> AgentClass {
        AgentClass::of(self.teams[usize::from(team)].class)
    }

    pub fn n_agents(&self) -> usize {
        self.teams.iter().map(|t| t.count).sum()
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    kind: ScenarioKind,
    map_width: Option<i32>,
    map_height: Option<i32>,
    episode_length: Option<usize>,
    obs_radius: Option<f64>,
    max_visible_neighbors: Option<usize>,
    food_count: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardOverrides {
    move_cost: Option<f64>,
    attack_empty_cost: Option<f64>,
    attack_hit_reward: Option<f64>,
    kill_reward: Option<f64>,
    food_reward: Option<f64>,
    attack_space_cost: Option<f64>,
    hit_prey_reward: Option<f64>,
    kill_prey_reward: Option<f64>,
    attacked_penalty: Option<f64>,
    death_penalty: Option<f64>,
}

impl RewardOverrides {
    fn apply(&self, t: &mut RewardTable) {
        let fields = [
            (self.move_cost, &mut t.move_cost),
            (self.attack_empty_cost, &mut t.attack_empty_cost),
            (self.attack_hit_reward, &mut t.attack_hit_reward),
            (self.kill_reward, &mut t.kill_reward),
            (self.food_reward, &mut t.food_reward),
            (self.attack_space_cost, &mut t.attack_space_cost),
            (self.hit_prey_reward, &mut t.hit_prey_reward),
            (self.kill_prey_reward, &mut t.kill_prey_reward),
            (self.attacked_penalty, &mut t.attacked_penalty),
            (self.death_penalty, &mut t.death_penalty),
        ];
        for (value, slot) in fields {
            if let Some(v) = value {
                *slot = v;
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentSection {
    team: u8,
    class: ClassKind,
    count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenario: ScenarioSection,
    #[serde(default)]
    rewards: RewardOverrides,
    agents: BTreeMap<String, AgentSection>,
    training: Option<toml::Table>,
}

/// A parsed config file: the validated scenario and, when present, the raw
/// `[training]` table for the trainer to interpret.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub spec: ScenarioSpec,
    pub training: Option<toml::Table>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, EngineError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| EngineError::Config(e.to_string()))?;
        let s = file.scenario;
        let mut spec = ScenarioSpec::new(s.kind, [(ClassKind::Battle, 1), (ClassKind::Battle, 1)]);
        spec.map_width = s.map_width.unwrap_or(spec.map_width);
        spec.map_height = s.map_height.unwrap_or(spec.map_height);
        spec.episode_length = s.episode_length.unwrap_or(spec.episode_length);
        spec.obs_radius = s.obs_radius.unwrap_or(spec.obs_radius);
        spec.max_visible_neighbors = s.max_visible_neighbors.unwrap_or(spec.max_visible_neighbors);
        spec.food_count = s.food_count.unwrap_or(spec.food_count);
        spec.rng_seed = s.seed.unwrap_or(0);
        file.rewards.apply(&mut spec.rewards);

        let mut teams: Vec<Option<TeamSpec>> = vec![None, None];
        for (name, a) in &file.agents {
            let slot = teams
                .get_mut(usize::from(a.team))
                .ok_or_else(|| EngineError::Config(format!("agents.{name}: team must be 0 or 1")))?;
            if slot.is_some() {
                return Err(EngineError::Config(format!("agents.{name}: team {} defined twice", a.team)));
            }
            *slot = Some(TeamSpec { team_id: a.team, class: a.class, count: a.count });
        }
        spec.teams = teams
            .into_iter()
            .enumerate()
            .map(|(i, t)| t.ok_or_else(|| EngineError::Config(format!("no [agents.*] section for team {i}"))))
            .collect::<Result<_, _>>()?;
        spec.validate()?;
        Ok(ScenarioConfig { spec, training: file.training })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}
