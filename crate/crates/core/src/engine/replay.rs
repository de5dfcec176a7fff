//! Line-oriented replay logs: a JSON header carrying the scenario, seed and
//! episode, then one JSON record per step.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::scenario::{ActionId, ScenarioSpec};
use super::world::{StepOutcome, World};
use super::EngineError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayHeader {
    pub spec_hash: String,
    pub seed: u64,
    pub episode: u64,
    pub spec: ScenarioSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayRecord {
    pub step: usize,
    pub actions: Vec<Option<ActionId>>,
    pub rewards: Vec<f64>,
    pub kills: Vec<(usize, usize)>,
    pub survivors: [usize; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Replay {
    pub header: ReplayHeader,
    pub records: Vec<ReplayRecord>,
}

impl ReplayHeader {
    pub fn for_world(world: &World) -> Self {
        ReplayHeader {
            spec_hash: world.spec().hash(),
            seed: world.seed(),
            episode: world.episode(),
            spec: world.spec().clone(),
        }
    }
}

/// Streams a replay log to `out`, header first.
pub struct ReplayWriter<W: Write> {
    out: W,
}

impl<W: Write> ReplayWriter<W> {
    /// Writes the header for a freshly reset `world`.
    pub fn new(mut out: W, world: &World) -> Result<Self, EngineError> {
        write_json_line(&mut out, &ReplayHeader::for_world(world))?;
        Ok(ReplayWriter { out })
    }

    /// Records the step that produced `outcome`; call after `World::step`.
    pub fn record(&mut self, world: &World, actions: &[Option<ActionId>], outcome: &StepOutcome) -> Result<(), EngineError> {
        let record = ReplayRecord {
            step: world.step_index() - 1,
            actions: actions.to_vec(),
            rewards: outcome.rewards.clone(),
            kills: outcome.kills.clone(),
            survivors: world.survivors(),
        };
        write_json_line(&mut self.out, &record)
    }

    pub fn into_inner(mut self) -> Result<W, EngineError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn write_json_line<T: Serialize>(out: &mut impl Write, value: &T) -> Result<(), EngineError> {
    let line = serde_json::to_string(value).map_err(|e| EngineError::InvalidState(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

impl Replay {
    /// Parses a log; errors name the 1-based line at fault.
    pub fn parse(text: &str) -> Result<Self, EngineError> {
        let bad = |line: usize, message: String| EngineError::Replay { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, first) = lines.next().ok_or_else(|| bad(1, "empty replay log".into()))?;
        let header: ReplayHeader = serde_json::from_str(first).map_err(|e| bad(1, format!("header: {e}")))?;
        if header.spec.hash() != header.spec_hash {
            return Err(bad(1, "spec hash does not match the embedded scenario".into()));
        }
        header.spec.validate().map_err(|e| bad(1, e.to_string()))?;
        let n_agents = header.spec.n_agents();
        let mut records = Vec::new();
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let record: ReplayRecord = serde_json::from_str(line).map_err(|e| bad(lineno, e.to_string()))?;
            if record.step != records.len() {
                return Err(bad(lineno, format!("expected step {}, found {}", records.len(), record.step)));
            }
            if record.actions.len() != n_agents || record.rewards.len() != n_agents {
                return Err(bad(lineno, format!("record does not cover {n_agents} agents")));
            }
            records.push(record);
        }
        Ok(Replay { header, records })
    }

    /// Re-simulates the episode, calling `visit` with the world after every
    /// step. Fails if the re-simulation disagrees with the log.
    pub fn replay(&self, mut visit: impl FnMut(&World) -> Result<(), EngineError>) -> Result<(), EngineError> {
        let mut world = World::with_seed(&self.header.spec, self.header.seed, self.header.episode)?;
        for (k, record) in self.records.iter().enumerate() {
            let line = k + 2;
            let outcome = world
                .step(&record.actions)
                .map_err(|e| EngineError::Replay { line, message: e.to_string() })?;
            if world.survivors() != record.survivors || outcome.kills != record.kills {
                return Err(EngineError::Replay { line, message: "re-simulation diverges from the log".into() });
            }
            visit(&world)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::scenario::{ClassKind, ScenarioKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logged_episode(steps: usize) -> String {
        let mut spec = ScenarioSpec::new(ScenarioKind::Multibattle, [(ClassKind::Battle, 4), (ClassKind::Battle, 4)]);
        spec.map_width = 12;
        spec.map_height = 12;
        spec.episode_length = steps;
        let mut world = World::with_seed(&spec, 3, 1).unwrap();
        let mut writer = ReplayWriter::new(Vec::new(), &world).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        while !world.is_terminal() {
            let actions: Vec<_> = world.agents().iter().map(|a| a.alive.then(|| rng.random_range(0..21))).collect();
            let out = world.step(&actions).unwrap();
            writer.record(&world, &actions, &out).unwrap();
        }
        String::from_utf8(writer.into_inner().unwrap()).unwrap()
    }

    #[test]
    fn parse_and_replay() {
        let text = logged_episode(10);
        let replay = Replay::parse(&text).unwrap();
        assert_eq!(replay.header.seed, 3);
        assert!(!replay.records.is_empty() && replay.records.len() <= 10);
        let mut steps = 0;
        replay.replay(|_| {
            steps += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(steps, replay.records.len());
    }

    #[test]
    fn malformed_line_is_named() {
        let text = logged_episode(10);
        let mut lines: Vec<&str> = text.lines().collect();
        lines[3] = "{\"step\": 2, \"actions\": [";
        let err = Replay::parse(&lines.join("\n")).unwrap_err();
        assert!(matches!(err, EngineError::Replay { line: 4, .. }), "{err}");
        let err = Replay::parse("").unwrap_err();
        assert!(matches!(err, EngineError::Replay { line: 1, .. }));
    }

    #[test]
    fn tampered_actions_are_detected_or_tolerated_consistently() {
        let text = logged_episode(10);
        let a = Replay::parse(&text).unwrap();
        let b = Replay::parse(&text).unwrap();
        assert_eq!(a, b);
    }
}
