//! The graph-attention neighbor selector.
//!
//! Each agent's observation is encoded by an FC layer and an LSTM cell into
//! a hidden state `h`, which an FC layer turns into a message. For a central
//! agent, a GAT layer runs over the star graph of itself and its visible
//! neighbors; every edge's concatenated node features `[e_i ∥ e_j]` go
//! through an MLP to two logits, and a hard Gumbel-Softmax picks whether
//! neighbor `i` is selected. The masked mean of the selected neighbors'
//! actions is the agent's mean action.

use rand::Rng;

use crate::engine::ActionId;
use crate::nncore::layers::{self, Activation, GraphEdges};
use crate::nncore::{NnError, ParamStore, Tape, Tensor, Var};

use super::{AdjacencyMask, EstimatorError, MeanAction, NeighborActions};

/// Parameter-name prefix of every weight in this module.
pub const PREFIX: &str = "graph_attention";
/// Hidden, message and GAT width.
pub const HIDDEN: usize = 64;
/// Gumbel-Softmax temperature of the selection head.
pub const TEMPERATURE: f64 = 0.5;
/// Logit column meaning "neighbor selected".
pub const SELECT: usize = 1;

fn name(part: &str) -> String {
    format!("{PREFIX}.{part}")
}

/// Per-agent LSTM state, one row per agent id.
#[derive(Clone, Debug, PartialEq)]
pub struct Memory {
    pub h: Tensor,
    pub c: Tensor,
}

impl Memory {
    pub fn zeros(n_agents: usize, hidden: usize) -> Self {
        Memory { h: Tensor::zeros(n_agents, hidden), c: Tensor::zeros(n_agents, hidden) }
    }

    pub fn reset(&mut self) {
        self.h.data_mut().fill(0.0);
        self.c.data_mut().fill(0.0);
    }
}

/// A central node and its leaves, as row indices into a node table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Star {
    pub center: usize,
    pub leaves: Vec<usize>,
}

/// Edge-level bookkeeping for a batch of stars.
#[derive(Clone, Debug)]
pub struct StarBatch {
    stars: Vec<Star>,
    /// Star index of each edge (one edge per leaf), in star-major order.
    edge_star: Vec<usize>,
}

impl StarBatch {
    pub fn new(stars: Vec<Star>) -> Self {
        let edge_star = stars
            .iter()
            .enumerate()
            .flat_map(|(s, star)| std::iter::repeat_n(s, star.leaves.len()))
            .collect();
        StarBatch { stars, edge_star }
    }

    pub fn stars(&self) -> &[Star] {
        &self.stars
    }

    pub fn n_edges(&self) -> usize {
        self.edge_star.len()
    }

    pub fn edge_star(&self) -> &[usize] {
        &self.edge_star
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphAttentionNet {
    pub feature_len: usize,
    pub hidden: usize,
}

impl GraphAttentionNet {
    /// Registers encoder, LSTM, message, GAT and edge-MLP weights.
    pub fn register<R: Rng + ?Sized>(store: &mut ParamStore, feature_len: usize, hidden: usize, rng: &mut R) -> Result<Self, NnError> {
        layers::register_fc(store, &name("encoder"), feature_len, hidden, rng)?;
        layers::register_lstm(store, &name("lstm"), hidden, hidden, rng)?;
        layers::register_fc(store, &name("message"), hidden, hidden, rng)?;
        layers::register_gat(store, &name("gat"), hidden, rng)?;
        layers::register_mlp(store, &name("edge"), &[2 * hidden, hidden, 2], rng)?;
        Ok(GraphAttentionNet { feature_len, hidden })
    }

    /// One recurrent step on the tape: `h′, c′ = LSTM(ReLU(FC(o)), h, c)`.
    pub fn encode_tape(&self, tape: &mut Tape<'_>, obs: Var, h: Var, c: Var) -> Result<(Var, Var), NnError> {
        if tape.value(obs).cols() != self.feature_len {
            return Err(NnError::Shape(format!(
                "observation has {} features, network expects {}",
                tape.value(obs).cols(),
                self.feature_len
            )));
        }
        let x = layers::fc(tape, obs, &name("encoder"), Activation::Relu)?;
        layers::lstm_cell(tape, x, h, c, &name("lstm"))
    }

    /// Advances the memory rows `ids` with observations `obs` (one row per
    /// id, same order).
    pub fn encode(&self, store: &ParamStore, obs: &Tensor, ids: &[usize], memory: &mut Memory) -> Result<(), NnError> {
        if obs.rows() != ids.len() {
            return Err(NnError::Shape(format!("{} observations for {} agents", obs.rows(), ids.len())));
        }
        if ids.is_empty() {
            return Ok(());
        }
        let mut tape = Tape::new(store);
        let o = tape.constant(obs.clone());
        let h = tape.constant(gather(&memory.h, ids));
        let c = tape.constant(gather(&memory.c, ids));
        let (h2, c2) = self.encode_tape(&mut tape, o, h, c)?;
        for (r, &id) in ids.iter().enumerate() {
            memory.h.row_slice_mut(id).copy_from_slice(tape.value(h2).row_slice(r));
            memory.c.row_slice_mut(id).copy_from_slice(tape.value(c2).row_slice(r));
        }
        Ok(())
    }

    /// Message of a single agent from its (updated) hidden state.
    pub fn encode_obs(&self, store: &ParamStore, obs: &[f64], memory: &mut Memory, id: usize) -> Result<Vec<f64>, NnError> {
        self.encode(store, &Tensor::row(obs), &[id], memory)?;
        let mut tape = Tape::new(store);
        let h = tape.constant(Tensor::row(memory.h.row_slice(id)));
        let m = layers::fc(&mut tape, h, &name("message"), Activation::Identity)?;
        Ok(tape.value(m).data().to_vec())
    }

    /// Selection values `g` `[E×1]` for every star edge, or `None` when the
    /// batch has no edges. `hidden` holds the node table's LSTM states;
    /// `noise` is the Gumbel noise `[E×2]`. With `hard`, `g ∈ {0, 1}` in the
    /// forward pass and carries straight-through gradients.
    pub fn select_tape(
        &self,
        tape: &mut Tape<'_>,
        hidden: Var,
        batch: &StarBatch,
        noise: Tensor,
        hard: bool,
    ) -> Result<Option<Var>, NnError> {
        let n_edges = batch.n_edges();
        if n_edges == 0 {
            return Ok(None);
        }
        if noise.shape() != [n_edges, 2] {
            return Err(NnError::Shape(format!("gumbel noise {:?} for {n_edges} edges", noise.shape())));
        }
        let mut order = Vec::with_capacity(batch.stars.len() + n_edges);
        let mut leaf_nodes = Vec::with_capacity(n_edges);
        let mut center_nodes = Vec::with_capacity(n_edges);
        for star in &batch.stars {
            let c = order.len();
            order.push(star.center);
            for (k, &leaf) in star.leaves.iter().enumerate() {
                order.push(leaf);
                leaf_nodes.push(c + 1 + k);
                center_nodes.push(c);
            }
        }
        let counts: Vec<usize> = batch.stars.iter().map(|s| s.leaves.len()).collect();
        let edges = GraphEdges::stars(&counts);

        let h = tape.gather_rows(hidden, &order)?;
        let m = layers::fc(tape, h, &name("message"), Activation::Identity)?;
        let e = layers::gat_layer(tape, m, &edges, &name("gat"))?.features;
        let e_leaf = tape.gather_rows(e, &leaf_nodes)?;
        let e_center = tape.gather_rows(e, &center_nodes)?;
        let pair = tape.concat_cols(&[e_leaf, e_center])?;
        let logits = layers::mlp(tape, pair, &name("edge"), 2)?;
        let y = layers::gumbel_softmax_with_noise(tape, logits, noise, TEMPERATURE, hard)?;
        Ok(Some(tape.pick_cols(y, &vec![SELECT; n_edges])?))
    }

    /// Masks for every star of `batch`, hard mode, noise drawn from `rng`.
    pub fn select<R: Rng + ?Sized>(
        &self,
        store: &ParamStore,
        hidden: &Tensor,
        batch: &StarBatch,
        rng: &mut R,
    ) -> Result<Vec<AdjacencyMask>, NnError> {
        let noise = layers::gumbel_noise(batch.n_edges(), 2, rng);
        self.select_with_noise(store, hidden, batch, noise)
    }

    pub fn select_with_noise(
        &self,
        store: &ParamStore,
        hidden: &Tensor,
        batch: &StarBatch,
        noise: Tensor,
    ) -> Result<Vec<AdjacencyMask>, NnError> {
        let mut tape = Tape::new(store);
        let h = tape.constant(hidden.clone());
        let g = self.select_tape(&mut tape, h, batch, noise, true)?;
        let values = g.map(|g| tape.value(g).data().to_vec()).unwrap_or_default();
        let mut masks: Vec<AdjacencyMask> = batch.stars.iter().map(|s| AdjacencyMask(Vec::with_capacity(s.leaves.len()))).collect();
        for (&s, &v) in batch.edge_star.iter().zip(&values) {
            masks[s].0.push(v == 1.0);
        }
        Ok(masks)
    }

    /// Mask for one central agent `center` with neighbors `leaves`, all rows
    /// of `hidden`.
    pub fn edge_select<R: Rng + ?Sized>(
        &self,
        store: &ParamStore,
        hidden: &Tensor,
        center: usize,
        leaves: &[usize],
        rng: &mut R,
    ) -> Result<AdjacencyMask, NnError> {
        let batch = StarBatch::new(vec![Star { center, leaves: leaves.to_vec() }]);
        Ok(self.select(store, hidden, &batch, rng)?.remove(0))
    }
}

fn gather(t: &Tensor, ids: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(ids.len(), t.cols());
    for (r, &id) in ids.iter().enumerate() {
        out.row_slice_mut(r).copy_from_slice(t.row_slice(id));
    }
    out
}

/// Masked mean on the tape: row `s` of the result is
/// `Σ_i g_i a_i / Σ_i g_i` over the edges of star `s`, or uniform where the
/// forward mask sum is zero. `actions[e]` is the action of edge `e`'s leaf.
pub fn masked_mean_tape(
    tape: &mut Tape<'_>,
    g: Option<Var>,
    batch: &StarBatch,
    actions: &[ActionId],
    n_actions: usize,
) -> Result<Var, EstimatorError> {
    let n_stars = batch.stars.len();
    if actions.len() != batch.n_edges() {
        return Err(EstimatorError::MaskLength { mask: batch.n_edges(), actions: actions.len() });
    }
    if let Some(&a) = actions.iter().find(|&&a| a >= n_actions) {
        return Err(EstimatorError::ActionOutOfRange { action: a, n_actions });
    }
    let Some(g) = g else {
        return Ok(tape.constant(Tensor::filled(n_stars, n_actions, 1.0 / n_actions as f64)));
    };
    let mut onehot = Tensor::zeros(actions.len(), n_actions);
    for (e, &a) in actions.iter().enumerate() {
        onehot.set(e, a, 1.0);
    }
    let onehot = tape.constant(onehot);
    let weighted = tape.mul_column(onehot, g)?;
    let numer = tape.scatter_add_rows(weighted, &batch.edge_star, n_stars)?;
    let denom = tape.scatter_add_rows(g, &batch.edge_star, n_stars)?;

    let mut numer_fix = Tensor::zeros(n_stars, n_actions);
    let mut denom_fix = Tensor::zeros(n_stars, 1);
    for s in 0..n_stars {
        if tape.value(denom).data()[s] == 0.0 {
            numer_fix.row_slice_mut(s).fill(1.0 / n_actions as f64);
            denom_fix.data_mut()[s] = 1.0;
        }
    }
    let numer_fix = tape.constant(numer_fix);
    let denom_fix = tape.constant(denom_fix);
    let numer = tape.add(numer, numer_fix)?;
    let denom = tape.add(denom, denom_fix)?;
    Ok(tape.div_column(numer, denom)?)
}

/// Convenience for a single agent: mask its neighbors and average the
/// selected actions.
pub fn attention_mean<R: Rng + ?Sized>(
    net: &GraphAttentionNet,
    store: &ParamStore,
    hidden: &Tensor,
    center: usize,
    neighbors: &NeighborActions,
    rng: &mut R,
) -> Result<(AdjacencyMask, MeanAction), EstimatorError> {
    let leaves: Vec<usize> = neighbors.entries().iter().map(|&(id, _)| id).collect();
    let mask = net.edge_select(store, hidden, center, &leaves, rng)?;
    let mean = super::masked_mean(&mask, neighbors)?;
    Ok((mask, mean))
}
