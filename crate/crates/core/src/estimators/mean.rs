//! Mean actions over a neighborhood: the plain average and the masked
//! average over attention-selected neighbors.

use serde::{Deserialize, Serialize};

use crate::engine::ActionId;

use super::EstimatorError;

/// A distribution over `L` actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanAction(Vec<f64>);

impl MeanAction {
    pub fn uniform(n_actions: usize) -> Self {
        MeanAction(vec![1.0 / n_actions as f64; n_actions])
    }

    /// Wraps `probs` after checking it lies on the simplex within `1e-9`.
    pub fn new(probs: Vec<f64>) -> Result<Self, EstimatorError> {
        let m = MeanAction(probs);
        if m.is_on_simplex(1e-9) {
            Ok(m)
        } else {
            Err(EstimatorError::NotOnSimplex)
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_on_simplex(&self, tol: f64) -> bool {
        !self.0.is_empty()
            && self.0.iter().all(|&p| p >= 0.0 && p.is_finite())
            && (self.0.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    /// `max_k |self_k − other_k|`.
    pub fn linf(&self, other: &MeanAction) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// The executed actions of an agent's observed neighbors.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborActions {
    n_actions: usize,
    entries: Vec<(usize, ActionId)>,
}

impl NeighborActions {
    pub fn new(n_actions: usize) -> Self {
        NeighborActions { n_actions, entries: Vec::new() }
    }

    pub fn from_actions(n_actions: usize, entries: &[(usize, ActionId)]) -> Result<Self, EstimatorError> {
        let mut out = Self::new(n_actions);
        for &(id, a) in entries {
            out.push(id, a)?;
        }
        Ok(out)
    }

    /// Builds from explicit one-hot vectors, rejecting anything that is not
    /// exactly one-hot of length `n_actions`.
    pub fn from_one_hot(n_actions: usize, entries: &[(usize, Vec<f64>)]) -> Result<Self, EstimatorError> {
        let mut out = Self::new(n_actions);
        for (id, v) in entries {
            if v.len() != n_actions {
                return Err(EstimatorError::ActionLength { expected: n_actions, got: v.len() });
            }
            let ones: Vec<usize> = v.iter().enumerate().filter(|(_, &x)| x == 1.0).map(|(k, _)| k).collect();
            if ones.len() != 1 || v.iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(EstimatorError::NotOneHot(*id));
            }
            out.entries.push((*id, ones[0]));
        }
        Ok(out)
    }

    pub fn push(&mut self, id: usize, action: ActionId) -> Result<(), EstimatorError> {
        if action >= self.n_actions {
            return Err(EstimatorError::ActionOutOfRange { action, n_actions: self.n_actions });
        }
        self.entries.push((id, action));
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, ActionId)] {
        &self.entries
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.entries.iter().map(|&(_, a)| a)
    }

    pub fn one_hot(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_actions];
        v[self.entries[k].1] = 1.0;
        v
    }
}

/// Binary neighbor selection, aligned with a [`NeighborActions`] list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyMask(pub Vec<bool>);

impl AdjacencyMask {
    pub fn full(n: usize) -> Self {
        AdjacencyMask(vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn selected(&self) -> usize {
        self.0.iter().filter(|&&g| g).count()
    }
}

/// Average of the neighbors' one-hot actions; uniform when there are none.
pub fn global_mean(actions: &NeighborActions) -> MeanAction {
    masked_sum_mean(actions, |_| 1.0)
}

/// Average over the neighbors the mask selects; uniform when it selects
/// none.
pub fn masked_mean(mask: &AdjacencyMask, actions: &NeighborActions) -> Result<MeanAction, EstimatorError> {
    if mask.len() != actions.len() {
        return Err(EstimatorError::MaskLength { mask: mask.len(), actions: actions.len() });
    }
    Ok(masked_sum_mean(actions, |k| if mask.0[k] { 1.0 } else { 0.0 }))
}

/// Shared summation so a full mask reproduces [`global_mean`] bit for bit.
fn masked_sum_mean(actions: &NeighborActions, weight: impl Fn(usize) -> f64) -> MeanAction {
    let n = actions.n_actions;
    let mut acc = vec![0.0; n];
    let mut total = 0.0;
    for (k, a) in actions.actions().enumerate() {
        let g = weight(k);
        acc[a] += g;
        total += g;
    }
    if total == 0.0 {
        return MeanAction::uniform(n);
    }
    for v in &mut acc {
        *v /= total;
    }
    MeanAction(acc)
}
