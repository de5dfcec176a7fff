//! Mean-action estimation by averaging draws from a Dirichlet posterior over
//! the observed neighbors' action counts.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EstimatorError, MeanAction, NeighborActions};

pub const DEFAULT_ETA: f64 = 1.0;
pub const DEFAULT_SAMPLES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletState {
    /// Prior concentration added to every count.
    pub eta: f64,
    pub counts: Vec<u64>,
    /// Number of Dirichlet draws averaged.
    pub samples: usize,
}

impl DirichletState {
    pub fn from_neighbors(actions: &NeighborActions, eta: f64, samples: usize) -> Self {
        let mut counts = vec![0; actions.n_actions()];
        for a in actions.actions() {
            counts[a] += 1;
        }
        DirichletState { eta, counts, samples }
    }

    pub fn posterior_mean(&self) -> MeanAction {
        let alpha: Vec<f64> = self.counts.iter().map(|&c| self.eta + c as f64).collect();
        let total: f64 = alpha.iter().sum();
        MeanAction::new(alpha.iter().map(|a| a / total).collect()).expect("posterior mean lies on the simplex")
    }
}

/// One Gamma(`shape`, 1) draw: Marsaglia–Tsang for `shape ≥ 1`, boosted
/// through `Gamma(shape + 1)·U^(1/shape)` below that.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.random();
        return sample_gamma(shape + 1.0, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Average of `samples` draws from `Dir(η + c₁, …, η + c_L)`.
pub fn dirichlet_mean<R: Rng + ?Sized>(state: &DirichletState, rng: &mut R) -> Result<MeanAction, EstimatorError> {
    if state.samples == 0 {
        return Err(EstimatorError::NoSamples);
    }
    if state.counts.is_empty() {
        return Err(EstimatorError::ActionLength { expected: 1, got: 0 });
    }
    let alpha: Vec<f64> = state.counts.iter().map(|&c| state.eta + c as f64).collect();
    if let Some(&a) = alpha.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
        return Err(EstimatorError::Concentration(a));
    }
    let mut acc = vec![0.0; alpha.len()];
    let mut draw = vec![0.0; alpha.len()];
    for _ in 0..state.samples {
        let total = loop {
            for (g, &a) in draw.iter_mut().zip(&alpha) {
                *g = sample_gamma(a, rng);
            }
            let total: f64 = draw.iter().sum();
            // tiny shapes can underflow every component to zero
            if total > 0.0 {
                break total;
            }
        };
        for (s, g) in acc.iter_mut().zip(&draw) {
            *s += g / total;
        }
    }
    let u = state.samples as f64;
    for s in &mut acc {
        *s /= u;
    }
    Ok(MeanAction::new(acc).expect("average of simplex points lies on the simplex"))
}
