//! A team's learner: online and target critics, the optional actor and
//! graph-attention selector, and their update rules.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::ActionId;
use crate::estimators::graph_attention::{self, GraphAttentionNet};
use crate::estimators::{masked_mean_tape, MeanAction, Star, StarBatch};
use crate::nncore::layers::{self, argmax};
use crate::nncore::{
    softmax_in_place, Checkpoint, CheckpointHeader, NnError, ParamStore, Tape, Tensor, Var, CHECKPOINT_VERSION,
};

use super::policy::{boltzmann_policy, sample_action};
use super::qnet::{QNet, ACTOR_PREFIX, Q_PREFIX};
use super::replay::Transition;
use super::LearnerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// Q-learning conditioned on the observed neighbors' average action.
    Mfq,
    /// Actor-critic with the same critic as `Mfq`.
    Mfac,
    /// Q-learning on a Dirichlet-sampled mean action.
    PomfqFor,
    /// Q-learning on the graph-attention masked mean action.
    Gamfq,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [LearnerKind::Mfq, LearnerKind::Mfac, LearnerKind::PomfqFor, LearnerKind::Gamfq];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Mfq => "mfq",
            LearnerKind::Mfac => "mfac",
            LearnerKind::PomfqFor => "pomfq_for",
            LearnerKind::Gamfq => "gamfq",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| LearnerError::UnknownKind(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub lr: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Inverse temperature of the Boltzmann policy and backup.
    pub beta: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Width of the critic's and actor's hidden layers.
    pub hidden: usize,
    pub gat_hidden: usize,
    pub actor_temperature: f64,
    pub dirichlet_eta: f64,
    pub dirichlet_samples: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            lr: 1e-4,
            gamma: 0.95,
            tau: 0.01,
            beta: 1.0,
            buffer_capacity: super::replay::DEFAULT_CAPACITY,
            batch_size: super::replay::DEFAULT_BATCH,
            hidden: 64,
            gat_hidden: graph_attention::HIDDEN,
            actor_temperature: 0.1,
            dirichlet_eta: crate::estimators::DEFAULT_ETA,
            dirichlet_samples: crate::estimators::DEFAULT_SAMPLES,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let positive = [
            ("lr", self.lr),
            ("tau", self.tau),
            ("actor_temperature", self.actor_temperature),
            ("dirichlet_eta", self.dirichlet_eta),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(LearnerError::Hyper(format!("{name} must be positive, got {v}")));
        }
        if !(0.0..=1.0).contains(&self.gamma) || self.tau > 1.0 || !(self.beta >= 0.0) {
            return Err(LearnerError::Hyper("gamma and tau must lie in [0, 1], beta must be non-negative".into()));
        }
        let sizes = [
            ("buffer_capacity", self.buffer_capacity),
            ("batch_size", self.batch_size),
            ("hidden", self.hidden),
            ("gat_hidden", self.gat_hidden),
            ("dirichlet_samples", self.dirichlet_samples),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(LearnerError::Hyper(format!("{name} must be positive")));
        }
        Ok(())
    }
}

/// What a checkpoint records about the learner itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerRecord {
    pub kind: LearnerKind,
    pub feature_len: usize,
    pub n_actions: usize,
    pub hyper: Hyperparameters,
}

/// Losses from one minibatch update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateLosses {
    pub critic: f64,
    pub actor: Option<f64>,
}

/// Hidden-state node table, star layout and leaf actions for recomputing
/// masked means.
#[derive(Clone, Debug)]
pub struct AttentionInputs {
    pub hidden: Tensor,
    pub stars: StarBatch,
    pub edge_actions: Vec<ActionId>,
}

/// A minibatch laid out for the critic loss.
#[derive(Clone, Debug)]
pub struct CriticBatch {
    pub obs: Tensor,
    pub means: Tensor,
    pub actions: Vec<ActionId>,
    pub targets: Vec<f64>,
    pub attention: Option<AttentionInputs>,
}

#[derive(Clone, Debug)]
pub struct Learner {
    kind: LearnerKind,
    hyper: Hyperparameters,
    qnet: QNet,
    gat: Option<GraphAttentionNet>,
    critic: ParamStore,
    target: ParamStore,
    actor: Option<ParamStore>,
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(
        kind: LearnerKind,
        feature_len: usize,
        n_actions: usize,
        hyper: Hyperparameters,
        rng: &mut R,
    ) -> Result<Self, LearnerError> {
        hyper.validate()?;
        let qnet = QNet { feature_len, n_actions, hidden: hyper.hidden };
        let mut critic = ParamStore::new();
        qnet.register(&mut critic, Q_PREFIX, rng)?;
        let gat = if kind == LearnerKind::Gamfq {
            Some(GraphAttentionNet::register(&mut critic, feature_len, hyper.gat_hidden, rng)?)
        } else {
            None
        };
        let actor = if kind == LearnerKind::Mfac {
            let mut store = ParamStore::new();
            qnet.register(&mut store, ACTOR_PREFIX, rng)?;
            Some(store)
        } else {
            None
        };
        let target = critic.snapshot();
        Ok(Learner { kind, hyper, qnet, gat, critic, target, actor })
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn feature_len(&self) -> usize {
        self.qnet.feature_len
    }

    pub fn n_actions(&self) -> usize {
        self.qnet.n_actions
    }

    pub fn graph_attention(&self) -> Option<&GraphAttentionNet> {
        self.gat.as_ref()
    }

    pub fn critic(&self) -> &ParamStore {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut ParamStore {
        &mut self.critic
    }

    pub fn target(&self) -> &ParamStore {
        &self.target
    }

    pub fn actor(&self) -> Option<&ParamStore> {
        self.actor.as_ref()
    }

    pub fn actor_mut(&mut self) -> Option<&mut ParamStore> {
        self.actor.as_mut()
    }

    /// Online Q-values `[n×L]` for observations `[n×F]` and mean actions
    /// `[n×L]`.
    pub fn q_values(&self, obs: &Tensor, means: &Tensor) -> Result<Tensor, LearnerError> {
        Ok(self.qnet.evaluate(&self.critic, Q_PREFIX, obs, means)?)
    }

    /// Action distribution per row: the actor's tempered softmax for
    /// actor-critic, the Boltzmann policy over online Q otherwise.
    pub fn policy(&self, obs: &Tensor, means: &Tensor) -> Result<Tensor, LearnerError> {
        let (mut rows, scale) = match &self.actor {
            Some(actor) => (self.qnet.evaluate(actor, ACTOR_PREFIX, obs, means)?, 1.0 / self.hyper.actor_temperature),
            None => (self.q_values(obs, means)?, self.hyper.beta),
        };
        for r in 0..rows.rows() {
            let row = rows.row_slice_mut(r);
            row.iter_mut().for_each(|v| *v *= scale);
            softmax_in_place(row);
        }
        Ok(rows)
    }

    /// One action for one agent from its observation and the mean action of
    /// the previous step, ε-mixed with uniform exploration.
    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        prev_mean: &MeanAction,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<ActionId, LearnerError> {
        let p = self.policy(&Tensor::row(obs), &Tensor::row(prev_mean.probs()))?;
        Ok(sample_action(p.row_slice(0), epsilon, rng))
    }

    /// Highest-probability action per row, ties to the lowest index.
    pub fn greedy(&self, obs: &Tensor, means: &Tensor) -> Result<Vec<ActionId>, LearnerError> {
        let scores = match &self.actor {
            Some(actor) => self.qnet.evaluate(actor, ACTOR_PREFIX, obs, means)?,
            None => self.q_values(obs, means)?,
        };
        Ok((0..scores.rows()).map(|r| argmax(scores.row_slice(r))).collect())
    }

    /// `y = r + γ Σ_a′ π(a′) Q_target(o′, a′, ā)` with `π` the Boltzmann
    /// policy over `Q_target`; `y = r` for terminal transitions.
    pub fn td_target(&self, batch: &[&Transition]) -> Result<Vec<f64>, LearnerError> {
        if batch.is_empty() {
            return Err(LearnerError::EmptyBatch);
        }
        let (_, next, means) = stack(self.qnet, batch)?;
        let q = self.qnet.evaluate(&self.target, Q_PREFIX, &next, &means)?;
        batch
            .iter()
            .enumerate()
            .map(|(r, t)| {
                if t.terminal {
                    return Ok(t.reward);
                }
                let qrow = q.row_slice(r);
                let pi = boltzmann_policy(qrow, self.hyper.beta)?;
                let v: f64 = pi.probs().iter().zip(qrow).map(|(p, q)| p * q).sum();
                Ok(t.reward + self.hyper.gamma * v)
            })
            .collect()
    }

    /// Node table, star layout and edge actions for recomputing the masked
    /// mean of a batch from its stored hidden states.
    fn attention_inputs(&self, batch: &[&Transition]) -> Result<AttentionInputs, LearnerError> {
        let h = self.hyper.gat_hidden;
        let mut table = Vec::new();
        let mut stars = Vec::with_capacity(batch.len());
        let mut actions = Vec::new();
        for t in batch {
            let rows = t.hidden.len() / h;
            if t.hidden.len() % h != 0 || rows != t.neighbor_actions.len() + 1 {
                return Err(LearnerError::Batch("stored hidden states do not match the neighbor list".into()));
            }
            let base = table.len() / h;
            table.extend_from_slice(&t.hidden);
            stars.push(Star { center: base, leaves: (base + 1..base + rows).collect() });
            actions.extend_from_slice(&t.neighbor_actions);
        }
        let n_rows = table.len() / h;
        Ok(AttentionInputs {
            hidden: Tensor::from_vec(n_rows, h, table)?,
            stars: StarBatch::new(stars),
            edge_actions: actions,
        })
    }

    /// Everything the critic loss needs from a minibatch, TD targets
    /// included.
    pub fn prepare_batch(&self, batch: &[&Transition]) -> Result<CriticBatch, LearnerError> {
        let targets = self.td_target(batch)?;
        let (obs, _, means) = stack(self.qnet, batch)?;
        let attention = match self.gat {
            Some(_) => Some(self.attention_inputs(batch)?),
            None => None,
        };
        Ok(CriticBatch { obs, means, actions: batch.iter().map(|t| t.action).collect(), targets, attention })
    }

    /// `mean((Q(o, a, ā) − y)²)` on `tape`, whose store must be the critic.
    /// The graph-attention learner recomputes `ā` from the stored hidden
    /// states with Gumbel `noise` `[E×2]`; `hard` selects straight-through
    /// masks instead of relaxed ones.
    pub fn critic_loss(
        &self,
        tape: &mut Tape<'_>,
        batch: &CriticBatch,
        noise: Option<&Tensor>,
        hard: bool,
    ) -> Result<Var, LearnerError> {
        let o = tape.constant(batch.obs.clone());
        let m = match (&self.gat, &batch.attention) {
            (Some(gat), Some(att)) => {
                let noise = match noise {
                    Some(n) => n.clone(),
                    None => return Err(LearnerError::Batch("graph-attention loss needs Gumbel noise".into())),
                };
                let hid = tape.constant(att.hidden.clone());
                let g = gat.select_tape(tape, hid, &att.stars, noise, hard)?;
                masked_mean_tape(tape, g, &att.stars, &att.edge_actions, self.qnet.n_actions)?
            }
            _ => tape.constant(batch.means.clone()),
        };
        let q = self.qnet.forward(tape, Q_PREFIX, o, m)?;
        let qa = tape.pick_cols(q, &batch.actions)?;
        let y = tape.constant(Tensor::from_vec(batch.targets.len(), 1, batch.targets.clone())?);
        let diff = tape.sub(qa, y)?;
        let sq = tape.square(diff)?;
        Ok(tape.mean(sq)?)
    }

    /// Mean squared TD error against [`Learner::td_target`], followed by an
    /// Adam step on the critic. The graph-attention learner recomputes its
    /// mean actions on the tape so the selector is trained through the loss;
    /// `rng` supplies that recomputation's Gumbel noise.
    pub fn q_update<R: Rng + ?Sized>(&mut self, batch: &[&Transition], rng: &mut R) -> Result<f64, LearnerError> {
        let prepared = self.prepare_batch(batch)?;
        let noise = prepared.attention.as_ref().map(|a| layers::gumbel_noise(a.stars.n_edges(), 2, rng));
        let (loss, grads) = {
            let mut tape = Tape::new(&self.critic);
            let loss = self.critic_loss(&mut tape, &prepared, noise.as_ref(), true)?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(LearnerError::NonFiniteLoss(value));
            }
            (value, tape.backward(loss)?)
        };
        self.critic.accumulate(&grads)?;
        self.critic.adam_step(self.hyper.lr)?;
        Ok(loss)
    }

    /// Policy-gradient step on the actor with advantages from the current
    /// critic, `A = Q(o,a,ā) − Σ_a′ π(a′)Q(o,a′,ā)`, held constant. The
    /// critic is not modified.
    pub fn actor_update(&mut self, batch: &[&Transition]) -> Result<f64, LearnerError> {
        if batch.is_empty() {
            return Err(LearnerError::EmptyBatch);
        }
        let Some(actor) = self.actor.as_mut() else {
            return Err(LearnerError::NotActorCritic(self.kind));
        };
        let (obs, _, means) = stack(self.qnet, batch)?;
        let q = self.qnet.evaluate(&self.critic, Q_PREFIX, &obs, &means)?;
        let actions: Vec<ActionId> = batch.iter().map(|t| t.action).collect();
        let inv_temp = 1.0 / self.hyper.actor_temperature;

        let (loss, grads) = {
            let mut tape = Tape::new(actor);
            let o = tape.constant(obs);
            let m = tape.constant(means);
            let logits = self.qnet.forward(&mut tape, ACTOR_PREFIX, o, m)?;
            let scaled = tape.scale(logits, inv_temp)?;
            let logp = tape.log_softmax_rows(scaled)?;
            let pi = tape.value(logp).map(f64::exp);
            let adv: Vec<f64> = (0..batch.len())
                .map(|r| {
                    let expected: f64 = pi.row_slice(r).iter().zip(q.row_slice(r)).map(|(p, q)| p * q).sum();
                    q.get(r, actions[r]) - expected
                })
                .collect();
            let adv = tape.constant(Tensor::from_vec(batch.len(), 1, adv)?);
            let lp = tape.pick_cols(logp, &actions)?;
            let weighted = tape.mul(lp, adv)?;
            let mean = tape.mean(weighted)?;
            let loss = tape.scale(mean, -1.0)?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(LearnerError::NonFiniteLoss(value));
            }
            (value, tape.backward(loss)?)
        };
        actor.accumulate(&grads)?;
        actor.adam_step(self.hyper.lr)?;
        Ok(loss)
    }

    /// Critic update, then actor update against the refreshed critic.
    pub fn mfac_update<R: Rng + ?Sized>(&mut self, batch: &[&Transition], rng: &mut R) -> Result<(f64, f64), LearnerError> {
        if self.kind != LearnerKind::Mfac {
            return Err(LearnerError::NotActorCritic(self.kind));
        }
        let critic = self.q_update(batch, rng)?;
        let actor = self.actor_update(batch)?;
        Ok((critic, actor))
    }

    /// The update rule of this learner's kind.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &[&Transition], rng: &mut R) -> Result<UpdateLosses, LearnerError> {
        if self.kind == LearnerKind::Mfac {
            let (critic, actor) = self.mfac_update(batch, rng)?;
            Ok(UpdateLosses { critic, actor: Some(actor) })
        } else {
            Ok(UpdateLosses { critic: self.q_update(batch, rng)?, actor: None })
        }
    }

    /// `θ_target ← τ θ_online + (1 − τ) θ_target`.
    pub fn soft_update(&mut self) -> Result<(), LearnerError> {
        self.target.soft_update_from(&self.critic, self.hyper.tau)?;
        Ok(())
    }

    pub fn record(&self) -> LearnerRecord {
        LearnerRecord {
            kind: self.kind,
            feature_len: self.qnet.feature_len,
            n_actions: self.qnet.n_actions,
            hyper: self.hyper.clone(),
        }
    }

    /// Full learner state, optimizer moments included.
    pub fn to_checkpoint(&self, scenario_hash: &str, extra: serde_json::Value) -> Result<Checkpoint, LearnerError> {
        let mut manifest = Vec::new();
        let mut tensors = Vec::new();
        let mut put = |name: String, t: &Tensor| {
            manifest.push(crate::nncore::ParamSpec { name, shape: t.shape() });
            tensors.push(t.clone());
        };
        let mut stores = vec![("online", &self.critic), ("target", &self.target)];
        if let Some(actor) = &self.actor {
            stores.push(("actor", actor));
        }
        for (section, store) in stores {
            for id in store.ids() {
                put(format!("{section}/{}", store.name(id)), store.value(id));
            }
        }
        let mut optimized = vec![("critic", &self.critic)];
        if let Some(actor) = &self.actor {
            optimized.push(("actor", actor));
        }
        for (section, store) in optimized {
            for id in store.ids() {
                let (m, v) = store.moments(id);
                put(format!("{section}_adam_m/{}", store.name(id)), m);
                put(format!("{section}_adam_v/{}", store.name(id)), v);
            }
            put(format!("step/{section}"), &Tensor::scalar(store.step_count() as f64));
        }
        let hyperparameters = serde_json::to_value(self.record()).map_err(|e| LearnerError::Batch(e.to_string()))?;
        Ok(Checkpoint {
            header: CheckpointHeader {
                format_version: CHECKPOINT_VERSION,
                scenario_hash: scenario_hash.to_string(),
                hyperparameters,
                extra,
                manifest,
            },
            tensors,
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, LearnerError> {
        let record: LearnerRecord = serde_json::from_value(ckpt.header.hyperparameters.clone())
            .map_err(|e| NnError::Checkpoint(format!("learner record: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut learner = Learner::new(record.kind, record.feature_len, record.n_actions, record.hyper, &mut rng)?;
        let tensors: BTreeMap<&str, &Tensor> =
            ckpt.header.manifest.iter().zip(&ckpt.tensors).map(|(s, t)| (s.name.as_str(), t)).collect();
        let fetch = |name: &str| -> Result<Tensor, NnError> {
            tensors
                .get(name)
                .map(|t| (*t).clone())
                .ok_or_else(|| NnError::Checkpoint(format!("missing tensor `{name}`")))
        };
        let expected = learner.to_checkpoint("", serde_json::Value::Null)?.header.manifest;
        if expected.len() != ckpt.header.manifest.len() {
            return Err(NnError::ManifestMismatch("checkpoint tensors do not match the learner layout".into()).into());
        }
        for (section, store) in [("online", &mut learner.critic), ("target", &mut learner.target)] {
            restore_values(store, section, &fetch)?;
        }
        restore_optimizer(&mut learner.critic, "critic", &fetch)?;
        if let Some(actor) = learner.actor.as_mut() {
            restore_values(actor, "actor", &fetch)?;
            restore_optimizer(actor, "actor", &fetch)?;
        }
        Ok(learner)
    }
}

/// Observations, next observations and mean actions of a batch as row
/// tensors.
fn stack(qnet: QNet, batch: &[&Transition]) -> Result<(Tensor, Tensor, Tensor), LearnerError> {
    let (f, l) = (qnet.feature_len, qnet.n_actions);
    let mut obs = Vec::with_capacity(batch.len() * f);
    let mut next = Vec::with_capacity(batch.len() * f);
    let mut means = Vec::with_capacity(batch.len() * l);
    for t in batch {
        if t.obs.len() != f || t.next_obs.len() != f || t.mean_action.len() != l || t.action >= l {
            return Err(LearnerError::Batch("transition shape does not match the learner".into()));
        }
        obs.extend_from_slice(&t.obs);
        next.extend_from_slice(&t.next_obs);
        means.extend_from_slice(&t.mean_action);
    }
    let n = batch.len();
    Ok((Tensor::from_vec(n, f, obs)?, Tensor::from_vec(n, f, next)?, Tensor::from_vec(n, l, means)?))
}

fn restore_values(
    store: &mut ParamStore,
    section: &str,
    fetch: &dyn Fn(&str) -> Result<Tensor, NnError>,
) -> Result<(), NnError> {
    for id in store.ids().collect::<Vec<_>>() {
        let name = store.name(id).to_string();
        store.set(&name, fetch(&format!("{section}/{name}"))?)?;
    }
    Ok(())
}

fn restore_optimizer(
    store: &mut ParamStore,
    section: &str,
    fetch: &dyn Fn(&str) -> Result<Tensor, NnError>,
) -> Result<(), NnError> {
    for id in store.ids().collect::<Vec<_>>() {
        let name = store.name(id).to_string();
        let m = fetch(&format!("{section}_adam_m/{name}"))?;
        let v = fetch(&format!("{section}_adam_v/{name}"))?;
        if m.shape() != store.value(id).shape() || v.shape() != m.shape() {
            return Err(NnError::ManifestMismatch(format!("optimizer moments of `{name}`")));
        }
        store.restore_optimizer(id, m, v);
    }
    let step = fetch(&format!("step/{section}"))?.item().unwrap_or(-1.0);
    if !(step >= 0.0 && step.fract() == 0.0) {
        return Err(NnError::Checkpoint(format!("invalid {section} step count")));
    }
    store.set_step_count(step as u64);
    Ok(())
}
