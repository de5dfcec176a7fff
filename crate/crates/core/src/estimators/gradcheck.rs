//! Finite-difference checks for every differentiable piece of the
//! graph-attention estimator, from single layers up to the full soft
//! selection and masked mean.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::nncore::layers::{self, Activation, GraphEdges};
use crate::nncore::{grad_check, GradCheckReport, NnError, ParamStore, Tape, Tensor, Var};
use crate::rng;

use super::graph_attention::{masked_mean_tape, GraphAttentionNet, Star, StarBatch};
use super::EstimatorError;

/// Central-difference step.
pub const GRADCHECK_EPS: f64 = 1e-6;
/// Largest accepted relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Names of the checks run by [`gradient_suite`], in order.
pub const GRADCHECK_LAYERS: [&str; 5] = ["fc", "lstm_cell", "gat_layer", "edge_mlp", "gamfq_estimator"];

fn random(rows: usize, cols: usize, g: &mut ChaCha8Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| g.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(rows, cols, data).expect("shape")
}

/// `Σ y ⊙ w` for a fixed random `w`, so every output entry matters.
fn probe(tape: &mut Tape<'_>, y: Var, w: &Tensor) -> Result<Var, NnError> {
    let w = tape.constant(w.clone());
    let p = tape.mul(y, w)?;
    tape.sum(p)
}

fn check(
    label: &str,
    store: &ParamStore,
    loss: impl Fn(&mut Tape<'_>) -> Result<Var, NnError>,
) -> Result<GradCheckReport, NnError> {
    grad_check(label, store, loss, GRADCHECK_EPS, GRADCHECK_TOLERANCE)
}

/// Runs every check of [`GRADCHECK_LAYERS`] on parameters and inputs drawn
/// from `seed`.
pub fn gradient_suite(seed: u64) -> Result<Vec<GradCheckReport>, EstimatorError> {
    let mut g = rng::stream(seed, &[0x6772_6164]);
    let mut reports = Vec::with_capacity(GRADCHECK_LAYERS.len());

    let mut store = ParamStore::new();
    layers::register_fc(&mut store, "fc", 6, 4, &mut g)?;
    store.set("fc.bias", random(1, 4, &mut g))?;
    let x = random(5, 6, &mut g);
    let w = random(5, 4, &mut g);
    reports.push(check("fc", &store, |tape| {
        let x = tape.constant(x.clone());
        let y = layers::fc(tape, x, "fc", Activation::Identity)?;
        probe(tape, y, &w)
    })?);

    let mut store = ParamStore::new();
    layers::register_lstm(&mut store, "lstm", 4, 3, &mut g)?;
    let (x, h, c) = (random(3, 4, &mut g), random(3, 3, &mut g), random(3, 3, &mut g));
    let (wh, wc) = (random(3, 3, &mut g), random(3, 3, &mut g));
    reports.push(check("lstm_cell", &store, |tape| {
        let (x, h, c) = (tape.constant(x.clone()), tape.constant(h.clone()), tape.constant(c.clone()));
        let (h2, c2) = layers::lstm_cell(tape, x, h, c, "lstm")?;
        let lh = probe(tape, h2, &wh)?;
        let lc = probe(tape, c2, &wc)?;
        tape.add(lh, lc)
    })?);

    let mut store = ParamStore::new();
    layers::register_gat(&mut store, "gat", 4, &mut g)?;
    let adjacency: Vec<Vec<bool>> =
        (0..5).map(|i| (0..5).map(|j| i != j && g.random_bool(0.5)).collect()).collect();
    let edges = GraphEdges::from_adjacency(&adjacency)?;
    let m = random(5, 4, &mut g);
    let (wf, wa) = (random(5, 4, &mut g), random(edges.n_edges(), 1, &mut g));
    reports.push(check("gat_layer", &store, |tape| {
        let m = tape.constant(m.clone());
        let out = layers::gat_layer(tape, m, &edges, "gat")?;
        let lf = probe(tape, out.features, &wf)?;
        let la = probe(tape, out.attention, &wa)?;
        tape.add(lf, la)
    })?);

    let mut store = ParamStore::new();
    layers::register_mlp(&mut store, "edge", &[8, 4, 2], &mut g)?;
    for k in 0..2 {
        let b = store.get(&format!("edge.{k}.bias"))?.shape();
        store.set(&format!("edge.{k}.bias"), random(b[0], b[1], &mut g))?;
    }
    let x = random(6, 8, &mut g);
    let w = random(6, 2, &mut g);
    reports.push(check("edge_mlp", &store, |tape| {
        let x = tape.constant(x.clone());
        let y = layers::mlp(tape, x, "edge", 2)?;
        probe(tape, y, &w)
    })?);

    reports.push(estimator_check(&mut g)?);
    Ok(reports)
}

/// Encoder and LSTM over every node, soft Gumbel selection on two stars,
/// then the masked mean action.
fn estimator_check(g: &mut ChaCha8Rng) -> Result<GradCheckReport, EstimatorError> {
    let (features, hidden, n_actions) = (6, 4, 3);
    let mut store = ParamStore::new();
    let net = GraphAttentionNet::register(&mut store, features, hidden, g)?;
    let stars = vec![Star { center: 0, leaves: vec![1, 2, 3] }, Star { center: 4, leaves: vec![5, 0] }];
    let batch = StarBatch::new(stars);
    let actions: Vec<usize> = (0..batch.n_edges()).map(|_| g.random_range(0..n_actions)).collect();
    let obs = random(6, features, g);
    let (h0, c0) = (random(6, hidden, g), random(6, hidden, g));
    let noise = layers::gumbel_noise(batch.n_edges(), 2, g);
    let w = random(2, n_actions, g);
    Ok(check("gamfq_estimator", &store, |tape| {
        let (o, h, c) = (tape.constant(obs.clone()), tape.constant(h0.clone()), tape.constant(c0.clone()));
        let (h, _) = net.encode_tape(tape, o, h, c)?;
        let sel = net.select_tape(tape, h, &batch, noise.clone(), false)?;
        let mean = masked_mean_tape(tape, sel, &batch, &actions, n_actions).map_err(|e| match e {
            EstimatorError::Nn(e) => e,
            other => NnError::Shape(other.to_string()),
        })?;
        probe(tape, mean, &w)
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes_and_covers_all_parameters() {
        let reports = gradient_suite(0).unwrap();
        let labels: Vec<&str> = reports.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, GRADCHECK_LAYERS);
        for r in &reports {
            assert!(r.passed(), "{}: {:?}", r.label, r.failures().collect::<Vec<_>>());
        }
        let full = &reports[4];
        for prefix in ["encoder", "lstm", "message", "gat", "edge"] {
            assert!(full.params.iter().any(|p| p.name.starts_with(&format!("graph_attention.{prefix}"))));
        }
    }
}
