//! The layer primitives the learners are built from: fully connected, LSTM
//! cell, graph attention, MLP and Gumbel-Softmax.
//!
//! Each layer owns a name prefix in the [`ParamStore`]. `register_*`
//! creates the parameters once; the forward functions look them up on every
//! call, so the same code serves online networks, target snapshots and
//! gradient checks.

use rand::Rng;

use super::{NnError, ParamStore, Tape, Tensor, Var};

/// Negative slope of the LeakyReLU inside graph-attention scores.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

/// `name.weight` is `[din × dout]` uniform in `±1/√din`, `name.bias` is zero.
pub fn register_fc<R: Rng + ?Sized>(
    store: &mut ParamStore,
    name: &str,
    din: usize,
    dout: usize,
    rng: &mut R,
) -> Result<(), NnError> {
    store.register_uniform(format!("{name}.weight"), din, dout, rng)?;
    store.register(format!("{name}.bias"), Tensor::zeros(1, dout))?;
    Ok(())
}

/// `y = act(x·W + b)`.
pub fn fc(tape: &mut Tape<'_>, x: Var, name: &str, act: Activation) -> Result<Var, NnError> {
    let w = tape.param_named(&format!("{name}.weight"))?;
    let b = tape.param_named(&format!("{name}.bias"))?;
    let xw = tape.matmul(x, w)?;
    let y = tape.add_bias(xw, b)?;
    match act {
        Activation::Identity => Ok(y),
        Activation::Relu => tape.relu(y),
    }
}

/// LSTM weights with gate blocks ordered `[input, forget, cell, output]`.
/// The forget-gate bias starts at +1.
pub fn register_lstm<R: Rng + ?Sized>(
    store: &mut ParamStore,
    name: &str,
    input: usize,
    hidden: usize,
    rng: &mut R,
) -> Result<(), NnError> {
    store.register_uniform(format!("{name}.w_ih"), input, 4 * hidden, rng)?;
    store.register_uniform(format!("{name}.w_hh"), hidden, 4 * hidden, rng)?;
    let mut bias = Tensor::zeros(1, 4 * hidden);
    bias.data_mut()[hidden..2 * hidden].fill(1.0);
    store.register(format!("{name}.bias"), bias)?;
    Ok(())
}

/// One LSTM step: `c′ = f⊙c + i⊙g`, `h′ = o⊙tanh(c′)`.
pub fn lstm_cell(tape: &mut Tape<'_>, x: Var, h: Var, c: Var, name: &str) -> Result<(Var, Var), NnError> {
    let hidden = tape.value(h).cols();
    if tape.value(c).shape() != tape.value(h).shape() || tape.value(x).rows() != tape.value(h).rows() {
        return Err(NnError::Shape(format!(
            "lstm_cell x {:?}, h {:?}, c {:?}",
            tape.value(x).shape(),
            tape.value(h).shape(),
            tape.value(c).shape()
        )));
    }
    let w_ih = tape.param_named(&format!("{name}.w_ih"))?;
    let w_hh = tape.param_named(&format!("{name}.w_hh"))?;
    let b = tape.param_named(&format!("{name}.bias"))?;
    if tape.value(w_hh).rows() != hidden {
        return Err(NnError::Shape(format!("{name}: hidden size {hidden} does not match weights")));
    }
    let xi = tape.matmul(x, w_ih)?;
    let hh = tape.matmul(h, w_hh)?;
    let pre = tape.add(xi, hh)?;
    let gates = tape.add_bias(pre, b)?;

    let i = tape.slice_cols(gates, 0, hidden)?;
    let f = tape.slice_cols(gates, hidden, hidden)?;
    let g = tape.slice_cols(gates, 2 * hidden, hidden)?;
    let o = tape.slice_cols(gates, 3 * hidden, hidden)?;
    let i = tape.sigmoid(i)?;
    let f = tape.sigmoid(f)?;
    let g = tape.tanh(g)?;
    let o = tape.sigmoid(o)?;

    let fc_ = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c_next = tape.add(fc_, ig)?;
    let tc = tape.tanh(c_next)?;
    let h_next = tape.mul(o, tc)?;
    Ok((h_next, c_next))
}

/// Directed edges `source → target` of an attention graph. Every node has a
/// self loop, so each node attends at least to itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphEdges {
    n_nodes: usize,
    targets: Vec<usize>,
    sources: Vec<usize>,
}

impl GraphEdges {
    /// `adjacency[j][i]` marks `i` as a neighbour of `j` (`j` attends to
    /// `i`). The diagonal is always treated as present.
    pub fn from_adjacency(adjacency: &[Vec<bool>]) -> Result<Self, NnError> {
        let n = adjacency.len();
        if n == 0 {
            return Err(NnError::Shape("empty graph".into()));
        }
        if adjacency.iter().any(|row| row.len() != n) {
            return Err(NnError::Shape("adjacency must be square".into()));
        }
        let mut edges = Self {
            n_nodes: n,
            targets: Vec::new(),
            sources: Vec::new(),
        };
        for (j, row) in adjacency.iter().enumerate() {
            for (i, &present) in row.iter().enumerate() {
                if present || i == j {
                    edges.targets.push(j);
                    edges.sources.push(i);
                }
            }
        }
        Ok(edges)
    }

    /// Disjoint star graphs laid out back to back. Star `s` has
    /// `1 + leaves[s]` consecutive nodes, its center first; the center
    /// attends to itself and every leaf, each leaf attends to itself and the
    /// center.
    pub fn stars(leaves: &[usize]) -> Self {
        let mut edges = Self {
            n_nodes: 0,
            targets: Vec::new(),
            sources: Vec::new(),
        };
        for &k in leaves {
            let center = edges.n_nodes;
            for i in 0..=k {
                edges.targets.push(center);
                edges.sources.push(center + i);
            }
            for i in 1..=k {
                edges.targets.push(center + i);
                edges.sources.push(center + i);
                edges.targets.push(center + i);
                edges.sources.push(center);
            }
            edges.n_nodes += k + 1;
        }
        edges
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }
}

/// Graph-attention weights: shared projection `name.w` `[D×D]` and
/// attention vector `name.a` `[2D×1]` (source half first).
pub fn register_gat<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, dim: usize, rng: &mut R) -> Result<(), NnError> {
    store.register_uniform(format!("{name}.w"), dim, dim, rng)?;
    store.register_uniform(format!("{name}.a"), 2 * dim, 1, rng)?;
    Ok(())
}

/// Output of [`gat_layer`].
#[derive(Clone, Copy, Debug)]
pub struct GatOutput {
    /// Node features `[n × D]`.
    pub features: Var,
    /// Attention coefficient per edge `[E × 1]`, aligned with
    /// [`GraphEdges::targets`].
    pub attention: Var,
}

/// Single-head graph attention:
/// `s_ij = LeakyReLU(aᵀ[W m_i ∥ W m_j])`, `α_ij = softmax_i(s_ij)` over the
/// sources `i` of target `j` (self included), `e_j = ELU(Σ_i α_ij W m_i)`.
pub fn gat_layer(tape: &mut Tape<'_>, messages: Var, edges: &GraphEdges, name: &str) -> Result<GatOutput, NnError> {
    let n = tape.value(messages).rows();
    if n == 0 || edges.n_nodes() == 0 {
        return Err(NnError::Shape("gat_layer on an empty graph".into()));
    }
    if n != edges.n_nodes() {
        return Err(NnError::Shape(format!("{n} messages for a {}-node graph", edges.n_nodes())));
    }
    let w = tape.param_named(&format!("{name}.w"))?;
    let a = tape.param_named(&format!("{name}.a"))?;
    let dim = tape.value(w).cols();
    let wm = tape.matmul(messages, w)?;
    let a_src = tape.slice_rows(a, 0, dim)?;
    let a_dst = tape.slice_rows(a, dim, dim)?;
    let s_src = tape.matmul(wm, a_src)?;
    let s_dst = tape.matmul(wm, a_dst)?;
    let e_src = tape.gather_rows(s_src, edges.sources())?;
    let e_dst = tape.gather_rows(s_dst, edges.targets())?;
    let scores = tape.add(e_src, e_dst)?;
    let scores = tape.leaky_relu(scores, LEAKY_SLOPE)?;
    let attention = tape.segment_softmax(scores, edges.targets())?;
    let msgs = tape.gather_rows(wm, edges.sources())?;
    let weighted = tape.mul_column(msgs, attention)?;
    let agg = tape.scatter_add_rows(weighted, edges.targets(), n)?;
    let features = tape.elu(agg)?;
    Ok(GatOutput { features, attention })
}

/// Layer sizes `[d0, d1, …, dk]` become FC layers `name.0 … name.{k-1}`.
pub fn register_mlp<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, sizes: &[usize], rng: &mut R) -> Result<(), NnError> {
    for (k, pair) in sizes.windows(2).enumerate() {
        register_fc(store, &format!("{name}.{k}"), pair[0], pair[1], rng)?;
    }
    Ok(())
}

/// ReLU between layers, linear output.
pub fn mlp(tape: &mut Tape<'_>, x: Var, name: &str, layers: usize) -> Result<Var, NnError> {
    let mut h = x;
    for k in 0..layers {
        let act = if k + 1 < layers { Activation::Relu } else { Activation::Identity };
        h = fc(tape, h, &format!("{name}.{k}"), act)?;
    }
    Ok(h)
}

/// Standard Gumbel(0, 1) draws.
pub fn gumbel_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            // open interval keeps both logarithms finite
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            -(-u.ln()).ln()
        })
        .collect();
    Tensor::from_vec(rows, cols, data).expect("shape")
}

/// Gumbel-Softmax with fresh noise from `rng`.
pub fn gumbel_softmax<R: Rng + ?Sized>(
    tape: &mut Tape<'_>,
    logits: Var,
    temperature: f64,
    hard: bool,
    rng: &mut R,
) -> Result<Var, NnError> {
    let [r, c] = tape.value(logits).shape();
    let noise = gumbel_noise(r, c, rng);
    gumbel_softmax_with_noise(tape, logits, noise, temperature, hard)
}

/// `softmax((logits + noise) / τ)`; with `hard`, the forward value is the
/// row-wise one-hot argmax while gradients follow the soft sample.
pub fn gumbel_softmax_with_noise(
    tape: &mut Tape<'_>,
    logits: Var,
    noise: Tensor,
    temperature: f64,
    hard: bool,
) -> Result<Var, NnError> {
    if !(temperature > 0.0) {
        return Err(NnError::Temperature(temperature));
    }
    let g = tape.constant(noise);
    let perturbed = tape.add(logits, g)?;
    let scaled = tape.scale(perturbed, 1.0 / temperature)?;
    let soft = tape.softmax_rows(scaled)?;
    if !hard {
        return Ok(soft);
    }
    let sv = tape.value(soft);
    let mut onehot = Tensor::zeros(sv.rows(), sv.cols());
    for r in 0..sv.rows() {
        let row = sv.row_slice(r);
        let best = argmax(row);
        onehot.set(r, best, 1.0);
    }
    tape.straight_through(soft, onehot)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}
