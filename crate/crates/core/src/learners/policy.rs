//! Boltzmann policies, ε-greedy mixing and the linear exploration schedule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::ActionId;
use crate::estimators::MeanAction;
use crate::nncore::softmax_in_place;

use super::LearnerError;

/// `π(a) ∝ exp(β·Q(a))`, stabilized by subtracting the maximum.
pub fn boltzmann_policy(qvals: &[f64], beta: f64) -> Result<MeanAction, LearnerError> {
    if qvals.is_empty() {
        return Err(LearnerError::EmptyQValues);
    }
    if !(beta >= 0.0) {
        return Err(LearnerError::Beta(beta));
    }
    let mut p: Vec<f64> = qvals.iter().map(|q| beta * q).collect();
    softmax_in_place(&mut p);
    Ok(MeanAction::new(p)?)
}

/// Uniform over the table with probability `epsilon`, otherwise a draw
/// from `probs`.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], epsilon: f64, rng: &mut R) -> ActionId {
    if epsilon > 0.0 && rng.random_bool(epsilon.min(1.0)) {
        return rng.random_range(0..probs.len());
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    // rounding left u above the running total; take the last nonzero entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Linear decay of the exploration rate from `start` at episode 0 to `end`
/// at the final episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub epochs: usize,
    pub start: f64,
    pub end: f64,
}

impl ExplorationSchedule {
    /// The 1 → 0 schedule.
    pub fn new(epochs: usize) -> Self {
        ExplorationSchedule { epochs, start: 1.0, end: 0.0 }
    }

    pub fn with_endpoints(epochs: usize, start: f64, end: f64) -> Self {
        ExplorationSchedule { epochs, start, end }
    }

    /// ε for the 1-based episode `episode`:
    /// `start + (end − start)·episode/epochs`, which is `1 − episode/epochs`
    /// for the default endpoints.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let frac = (episode as f64 / self.epochs as f64).min(1.0);
        (self.start + (self.end - self.start) * frac).clamp(0.0, 1.0)
    }
}
