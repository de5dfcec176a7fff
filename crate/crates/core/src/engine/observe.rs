//! Partial observations: an agent's own features, the nearest visible
//! agents within the observation radius, and (gathering) the nearest food.

use super::scenario::{ScenarioKind, VISIBLE_FOOD};
use super::world::World;
use super::EngineError;

/// `[x/W, y/H, hp/max_hp, team one-hot(2)]`.
pub const SELF_FEATURES: usize = 5;
/// `[present, dx/r, dy/r, hp/max_hp, same_team]` before the action one-hot.
pub const NEIGHBOR_PREFIX: usize = 5;
/// `[present, dx/W, dy/H]`.
pub const FOOD_FEATURES: usize = 3;

/// Sizes of the flat observation vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObsLayout {
    pub n_actions: usize,
    pub max_neighbors: usize,
    pub food_rows: usize,
}

impl ObsLayout {
    pub fn neighbor_row_len(&self) -> usize {
        NEIGHBOR_PREFIX + self.n_actions
    }

    pub fn neighbor_offset(&self, slot: usize) -> usize {
        SELF_FEATURES + slot * self.neighbor_row_len()
    }

    pub fn food_offset(&self) -> usize {
        self.neighbor_offset(self.max_neighbors)
    }

    pub fn feature_len(&self) -> usize {
        self.food_offset() + self.food_rows * FOOD_FEATURES
    }
}

/// One agent's view. `neighbors[k]` is the agent id behind present row `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub features: Vec<f64>,
    pub neighbors: Vec<usize>,
}

impl World {
    pub fn obs_layout(&self) -> ObsLayout {
        let spec = self.spec();
        ObsLayout {
            n_actions: self.n_actions(),
            max_neighbors: spec.max_visible_neighbors,
            food_rows: if spec.kind == ScenarioKind::Gathering { VISIBLE_FOOD } else { 0 },
        }
    }

    /// Center of an agent's footprint.
    pub fn center(&self, id: usize) -> (f64, f64) {
        let a = &self.agents()[id];
        let c = self.class(a.team).center_offset();
        (f64::from(a.x) + c, f64::from(a.y) + c)
    }

    /// Living agents within the observation radius of `id`, nearest first,
    /// ties by id, truncated to the visible maximum.
    pub fn visible_neighbors(&self, id: usize) -> Result<Vec<usize>, EngineError> {
        let me = self.agent(id)?;
        if !me.alive {
            return Err(EngineError::DeadAgent(id));
        }
        let (cx, cy) = self.center(id);
        let r = self.spec().obs_radius;
        let mut near: Vec<(f64, usize)> = self
            .agents()
            .iter()
            .filter(|a| a.alive && a.id != id)
            .filter_map(|a| {
                let (ox, oy) = self.center(a.id);
                let d = (ox - cx).hypot(oy - cy);
                (d <= r).then_some((d, a.id))
            })
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        near.truncate(self.spec().max_visible_neighbors);
        Ok(near.into_iter().map(|(_, i)| i).collect())
    }

    pub fn observe(&self, id: usize) -> Result<Observation, EngineError> {
        let layout = self.obs_layout();
        let mut features = vec![0.0; layout.feature_len()];
        let neighbors = self.observe_into(id, &mut features)?;
        Ok(Observation { features, neighbors })
    }

    /// Writes the observation of `id` into `out` (length
    /// [`ObsLayout::feature_len`]) and returns the visible neighbor ids.
    pub fn observe_into(&self, id: usize, out: &mut [f64]) -> Result<Vec<usize>, EngineError> {
        let layout = self.obs_layout();
        if out.len() != layout.feature_len() {
            return Err(EngineError::InvalidState(format!(
                "observation buffer has {} slots, expected {}",
                out.len(),
                layout.feature_len()
            )));
        }
        let neighbors = self.visible_neighbors(id)?;
        out.fill(0.0);
        let spec = self.spec();
        let (w, h) = (f64::from(spec.map_width), f64::from(spec.map_height));
        let r = spec.obs_radius;
        let me = &self.agents()[id];
        let (cx, cy) = self.center(id);

        out[0] = f64::from(me.x) / w;
        out[1] = f64::from(me.y) / h;
        out[2] = f64::from(me.hp) / f64::from(self.class(me.team).max_hp);
        out[3 + usize::from(me.team)] = 1.0;

        for (slot, &n) in neighbors.iter().enumerate() {
            let other = &self.agents()[n];
            let (ox, oy) = self.center(n);
            let row = &mut out[layout.neighbor_offset(slot)..layout.neighbor_offset(slot + 1)];
            row[0] = 1.0;
            row[1] = (ox - cx) / r;
            row[2] = (oy - cy) / r;
            row[3] = f64::from(other.hp) / f64::from(self.class(other.team).max_hp);
            row[4] = if other.team == me.team { 1.0 } else { 0.0 };
            if let Some(a) = other.last_action {
                row[NEIGHBOR_PREFIX + a] = 1.0;
            }
        }

        if layout.food_rows > 0 {
            let mut food: Vec<(f64, i32, i32)> = self
                .food_cells()
                .map(|(fx, fy)| ((f64::from(fx) - cx).hypot(f64::from(fy) - cy), fx, fy))
                .collect();
            food.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.2, a.1).cmp(&(b.2, b.1))));
            let base = layout.food_offset();
            for (k, &(_, fx, fy)) in food.iter().take(layout.food_rows).enumerate() {
                let row = &mut out[base + k * FOOD_FEATURES..base + (k + 1) * FOOD_FEATURES];
                row[0] = 1.0;
                row[1] = (f64::from(fx) - cx) / w;
                row[2] = (f64::from(fy) - cy) / h;
            }
        }
        Ok(neighbors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::scenario::{ClassKind, ScenarioSpec};

    fn world(counts: [usize; 2], side: i32) -> World {
        let mut spec = ScenarioSpec::new(ScenarioKind::Multibattle, [(ClassKind::Battle, counts[0]), (ClassKind::Battle, counts[1])]);
        spec.map_width = side;
        spec.map_height = side;
        World::build(&spec).unwrap()
    }

    #[test]
    fn feature_length() {
        let w = world([1, 1], 10);
        assert_eq!(w.obs_layout().feature_len(), 525);
        let g = World::build(&ScenarioSpec::gathering()).unwrap();
        assert_eq!(g.obs_layout().feature_len(), 549);
    }

    #[test]
    fn radius_boundary() {
        let mut w = world([1, 2], 20);
        // Agent 1 sits exactly 6.0 away, agent 2 at √40 ≈ 6.32.
        w.arrange(&[(0, 0, 10), (6, 0, 10), (6, 2, 10)]).unwrap();
        assert_eq!(w.visible_neighbors(0).unwrap(), vec![1]);
        w.arrange(&[(0, 0, 10), (6, 0, 10), (0, 7, 10)]).unwrap();
        assert_eq!(w.visible_neighbors(0).unwrap(), vec![1]);
    }

    #[test]
    fn lone_agent_sees_nothing() {
        let mut w = world([1, 1], 20);
        w.arrange(&[(0, 0, 10), (18, 18, 10)]).unwrap();
        let o = w.observe(0).unwrap();
        assert!(o.neighbors.is_empty());
        assert!(o.features[SELF_FEATURES..].iter().all(|&v| v == 0.0));
        assert_eq!(&o.features[..SELF_FEATURES], &[0.0, 0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn keeps_the_twenty_nearest() {
        // A packed 6×6 lattice: 26 agents lie within radius of agent 14.
        let mut w = world([18, 18], 28);
        let layout: Vec<_> = (0..36).map(|k| (2 * (k % 6), 2 * (k / 6), 10)).collect();
        w.arrange(&layout).unwrap();
        let n = w.visible_neighbors(14).unwrap();
        assert_eq!(n.len(), 20);
        let d = |i: usize| {
            let (ax, ay) = w.center(14);
            let (bx, by) = w.center(i);
            (ax - bx).hypot(ay - by)
        };
        let cutoff = d(*n.last().unwrap());
        for other in (0..36).filter(|&i| i != 14 && !n.contains(&i)) {
            assert!(d(other) >= cutoff);
        }
        assert!(n.windows(2).all(|p| (d(p[0]), p[0]) < (d(p[1]), p[1])));
    }

    #[test]
    fn neighbor_row_contents() {
        let mut w = world([1, 1], 20);
        w.arrange(&[(0, 0, 10), (3, 0, 4)]).unwrap();
        w.step(&[Some(0), Some(5)]).unwrap();
        let o = w.observe(0).unwrap();
        let layout = w.obs_layout();
        let row = &o.features[layout.neighbor_offset(0)..layout.neighbor_offset(1)];
        let moved = w.agents()[1].x - 3;
        assert_eq!(row[0], 1.0);
        assert_eq!(row[1], f64::from(3 + moved) / 6.0);
        assert_eq!(row[3], 0.4);
        assert_eq!(row[4], 0.0);
        assert_eq!(row[NEIGHBOR_PREFIX + 5], 1.0);
        assert_eq!(row[NEIGHBOR_PREFIX..].iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn dead_agents_cannot_observe() {
        let mut w = world([1, 1], 20);
        w.arrange(&[(0, 0, 0), (3, 0, 4)]).unwrap();
        assert!(matches!(w.observe(0), Err(EngineError::DeadAgent(0))));
        assert!(matches!(w.observe(7), Err(EngineError::UnknownAgent(7))));
    }

    #[test]
    fn food_rows_nearest_first() {
        let mut spec = ScenarioSpec::gathering();
        spec.teams[0].count = 1;
        spec.teams[1].count = 1;
        spec.food_count = 0;
        spec.map_width = 20;
        spec.map_height = 20;
        let mut w = World::build(&spec).unwrap();
        w.arrange(&[(0, 0, 10), (18, 18, 10)]).unwrap();
        w.set_food(10, 0, true);
        w.set_food(4, 0, true);
        let o = w.observe(0).unwrap();
        let base = w.obs_layout().food_offset();
        assert_eq!(&o.features[base..base + 6], &[1.0, 3.5 / 20.0, -0.5 / 20.0, 1.0, 9.5 / 20.0, -0.5 / 20.0]);
    }
}
