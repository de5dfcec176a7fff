//! Transitions and the per-team FIFO replay buffer.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::ActionId;
use crate::nncore::{Checkpoint, CheckpointHeader, NnError, ParamSpec, Tensor, CHECKPOINT_VERSION};

pub const DEFAULT_CAPACITY: usize = 1024;
pub const DEFAULT_BATCH: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: ActionId,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// Mean action the transition is trained and bootstrapped with.
    pub mean_action: Vec<f64>,
    /// Actions of the observed neighbors at this step, in observation order.
    pub neighbor_actions: Vec<ActionId>,
    /// Graph-attention learners only: LSTM hidden states, the agent's own
    /// row first, then one row per neighbor, flattened.
    pub hidden: Vec<f64>,
    /// Death or team elimination; the time limit is not terminal.
    pub terminal: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStats {
    pub capacity: usize,
    pub len: usize,
    pub pushed: u64,
}

/// Ring buffer; the oldest transition is evicted first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { capacity, items: Vec::with_capacity(capacity), next: 0, pushed: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushed += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn stats(&self) -> ReplayStats {
        ReplayStats { capacity: self.capacity, len: self.items.len(), pushed: self.pushed }
    }

    /// Storage slot `i` (not chronological).
    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// `k` distinct transitions chosen uniformly; all of them when fewer
    /// than `k` are stored.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<&Transition> {
        let k = k.min(self.items.len());
        index::sample(rng, self.items.len(), k).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BufferLayout {
    capacity: usize,
    next: usize,
    pushed: u64,
    obs_lens: Vec<usize>,
    mean_lens: Vec<usize>,
    hidden_lens: Vec<usize>,
    neighbor_lens: Vec<usize>,
}

const FIELDS: [&str; 8] = ["obs", "next_obs", "mean_action", "hidden", "neighbor_actions", "action", "reward", "terminal"];

impl ReplayBuffer {
    /// The buffer's exact contents and ring position in the checkpoint
    /// container, so a resumed run samples the same minibatches.
    pub fn to_checkpoint(&self, scenario_hash: &str) -> Result<Checkpoint, NnError> {
        let mut cols: [Vec<f64>; 8] = Default::default();
        for t in &self.items {
            cols[0].extend_from_slice(&t.obs);
            cols[1].extend_from_slice(&t.next_obs);
            cols[2].extend_from_slice(&t.mean_action);
            cols[3].extend_from_slice(&t.hidden);
            cols[4].extend(t.neighbor_actions.iter().map(|&a| a as f64));
            cols[5].push(t.action as f64);
            cols[6].push(t.reward);
            cols[7].push(if t.terminal { 1.0 } else { 0.0 });
        }
        let layout = BufferLayout {
            capacity: self.capacity,
            next: self.next,
            pushed: self.pushed,
            obs_lens: self.items.iter().map(|t| t.obs.len()).collect(),
            mean_lens: self.items.iter().map(|t| t.mean_action.len()).collect(),
            hidden_lens: self.items.iter().map(|t| t.hidden.len()).collect(),
            neighbor_lens: self.items.iter().map(|t| t.neighbor_actions.len()).collect(),
        };
        let tensors: Vec<Tensor> = cols.into_iter().map(|c| Tensor::from_vec(1, c.len(), c)).collect::<Result<_, _>>()?;
        Ok(Checkpoint {
            header: CheckpointHeader {
                format_version: CHECKPOINT_VERSION,
                scenario_hash: scenario_hash.to_string(),
                hyperparameters: serde_json::json!({ "replay_buffer": true }),
                extra: serde_json::to_value(layout).map_err(|e| NnError::Checkpoint(e.to_string()))?,
                manifest: FIELDS
                    .iter()
                    .zip(&tensors)
                    .map(|(name, t)| ParamSpec { name: name.to_string(), shape: t.shape() })
                    .collect(),
            },
            tensors,
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, NnError> {
        let bad = |m: &str| NnError::Checkpoint(format!("replay buffer: {m}"));
        let layout: BufferLayout = serde_json::from_value(ckpt.header.extra.clone()).map_err(|e| bad(&e.to_string()))?;
        let field = |name: &str| ckpt.tensor(name).map(Tensor::data).ok_or_else(|| bad(&format!("missing `{name}`")));
        let n = layout.obs_lens.len();
        let lens = [&layout.mean_lens, &layout.hidden_lens, &layout.neighbor_lens];
        if layout.capacity == 0 || n > layout.capacity || layout.next >= layout.capacity || lens.iter().any(|l| l.len() != n) {
            return Err(bad("inconsistent layout"));
        }
        let mut cursors = [0usize; 5];
        let mut take = |k: usize, name: &str, len: usize| -> Result<Vec<f64>, NnError> {
            let data = field(name)?;
            let out = data.get(cursors[k]..cursors[k] + len).ok_or_else(|| bad(&format!("`{name}` is short")))?;
            cursors[k] += len;
            Ok(out.to_vec())
        };
        let mut items = Vec::with_capacity(n);
        for i in 0..n {
            let obs = take(0, "obs", layout.obs_lens[i])?;
            let next_obs = take(1, "next_obs", layout.obs_lens[i])?;
            let mean_action = take(2, "mean_action", layout.mean_lens[i])?;
            let hidden = take(3, "hidden", layout.hidden_lens[i])?;
            let neighbor_actions = take(4, "neighbor_actions", layout.neighbor_lens[i])?.into_iter().map(|a| a as usize).collect();
            let scalar = |name: &str| field(name)?.get(i).copied().ok_or_else(|| bad(&format!("`{name}` is short")));
            items.push(Transition {
                obs,
                action: scalar("action")? as usize,
                reward: scalar("reward")?,
                next_obs,
                mean_action,
                neighbor_actions,
                hidden,
                terminal: scalar("terminal")? != 0.0,
            });
        }
        Ok(ReplayBuffer { capacity: layout.capacity, items, next: layout.next, pushed: layout.pushed })
    }
}
