//! Named parameters, their gradients and Adam moment accumulators.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// One manifest entry: parameter name and shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: [usize; 2],
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Parameters in registration order.
///
/// Registration order is the manifest order used by checkpoints, so two
/// stores built by the same code have identical manifests.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    index: BTreeMap<String, ParamId>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
    step: u64,
    grads_pending: bool,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, NnError> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(NnError::DuplicateParam(name));
        }
        if !value.all_finite() {
            return Err(NnError::NonFinite(format!("initial value of {name}")));
        }
        let id = ParamId(self.values.len());
        let [r, c] = value.shape();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        self.grads.push(Tensor::zeros(r, c));
        self.first_moment.push(Tensor::zeros(r, c));
        self.second_moment.push(Tensor::zeros(r, c));
        Ok(id)
    }

    /// Registers a `fan_in × fan_out` weight drawn from
    /// `U(-1/√fan_in, 1/√fan_in)`.
    pub fn register_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Result<ParamId, NnError> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        self.register(name, Tensor::from_vec(fan_in, fan_out, data)?)
    }

    pub fn id(&self, name: &str) -> Result<ParamId, NnError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, NnError> {
        Ok(self.value(self.id(name)?))
    }

    /// Overwrites a parameter's value; the shape must not change.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<(), NnError> {
        let id = self.id(name)?;
        if self.values[id.0].shape() != value.shape() {
            return Err(NnError::Shape(format!(
                "{name}: {:?} cannot replace {:?}",
                value.shape(),
                self.values[id.0].shape()
            )));
        }
        self.values[id.0] = value;
        Ok(())
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn manifest(&self) -> Vec<ParamSpec> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(name, v)| ParamSpec {
                name: name.clone(),
                shape: v.shape(),
            })
            .collect()
    }

    /// Number of completed Adam steps.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self, id: ParamId) -> (&Tensor, &Tensor) {
        (&self.first_moment[id.0], &self.second_moment[id.0])
    }

    pub(crate) fn restore_optimizer(&mut self, id: ParamId, m: Tensor, v: Tensor) {
        self.first_moment[id.0] = m;
        self.second_moment[id.0] = v;
    }

    pub(crate) fn set_step_count(&mut self, step: u64) {
        self.step = step;
    }

    /// Adds a set of gradients produced by [`super::Tape::backward`].
    pub fn accumulate(&mut self, grads: &Gradients) -> Result<(), NnError> {
        if grads.grads.len() != self.values.len() {
            return Err(NnError::ManifestMismatch(
                "gradients come from a different parameter store".into(),
            ));
        }
        for (acc, g) in self.grads.iter_mut().zip(&grads.grads) {
            if let Some(g) = g {
                acc.add_assign(g);
            }
        }
        self.grads_pending = true;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.data_mut().fill(0.0);
        }
        self.grads_pending = false;
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.data())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Adam (β1 = 0.9, β2 = 0.999, ε = 1e-8) with bias correction, then
    /// zeroes the gradients.
    pub fn adam_step(&mut self, lr: f64) -> Result<(), NnError> {
        if !self.grads_pending {
            return Err(NnError::MissingGradients);
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for i in 0..self.values.len() {
            let g = self.grads[i].data();
            let m = self.first_moment[i].data_mut();
            for (m, g) in m.iter_mut().zip(g) {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            }
            let v = self.second_moment[i].data_mut();
            for (v, g) in v.iter_mut().zip(g) {
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            }
            let m = self.first_moment[i].data();
            let v = self.second_moment[i].data();
            let w = self.values[i].data_mut();
            for ((w, m), v) in w.iter_mut().zip(m).zip(v) {
                let m_hat = m / c1;
                let v_hat = v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
        self.zero_grad();
        Ok(())
    }

    /// `self ← τ·online + (1 − τ)·self`, element-wise over matching manifests.
    pub fn soft_update_from(&mut self, online: &ParamStore, tau: f64) -> Result<(), NnError> {
        if self.manifest() != online.manifest() {
            return Err(NnError::ManifestMismatch(
                "soft update between stores with different manifests".into(),
            ));
        }
        for (target, src) in self.values.iter_mut().zip(&online.values) {
            for (t, s) in target.data_mut().iter_mut().zip(src.data()) {
                *t = tau * s + (1.0 - tau) * *t;
            }
        }
        Ok(())
    }

    /// A copy of the parameter values with fresh optimizer state, for target
    /// networks and read-only snapshots.
    pub fn snapshot(&self) -> ParamStore {
        let mut out = ParamStore::new();
        for (name, v) in self.names.iter().zip(&self.values) {
            out.register(name.clone(), v.clone())
                .expect("names are unique in the source store");
        }
        out
    }
}

/// Gradients for every parameter a tape touched; `None` for untouched ones.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub(crate) grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_scalar() -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.register("w", Tensor::scalar(0.5)).unwrap();
        (s, id)
    }

    fn grads_of(store: &ParamStore, id: ParamId, g: f64) -> Gradients {
        let mut grads = vec![None; store.len()];
        grads[id.0] = Some(Tensor::scalar(g));
        Gradients { grads }
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let (mut s, id) = one_scalar();
        s.accumulate(&grads_of(&s, id, 0.0)).unwrap();
        s.adam_step(1e-3).unwrap();
        assert_eq!(s.value(id).item(), Some(0.5));
    }

    #[test]
    fn constant_unit_gradient_moves_by_lr() {
        // With g ≡ 1 the bias-corrected moments are exactly m̂ = 1, v̂ = 1, so
        // every step has magnitude lr / (1 + ε).
        let (mut s, id) = one_scalar();
        let lr = 1e-3;
        let mut prev = 0.5;
        for _ in 0..200 {
            s.accumulate(&grads_of(&s, id, 1.0)).unwrap();
            s.adam_step(lr).unwrap();
            let now = s.value(id).item().unwrap();
            let delta = prev - now;
            assert!((delta - lr).abs() < 1e-9, "delta {delta}");
            prev = now;
        }
    }

    #[test]
    fn step_counter_increments_once_per_call() {
        let (mut s, id) = one_scalar();
        for k in 1..=5 {
            s.accumulate(&grads_of(&s, id, 0.3)).unwrap();
            s.adam_step(1e-2).unwrap();
            assert_eq!(s.step_count(), k);
            assert_eq!(s.grad(id).item(), Some(0.0));
        }
    }

    #[test]
    fn adam_without_gradients_is_an_error() {
        let (mut s, _) = one_scalar();
        assert!(matches!(s.adam_step(1e-3), Err(NnError::MissingGradients)));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let (mut s, _) = one_scalar();
        assert!(matches!(s.register("w", Tensor::scalar(1.0)), Err(NnError::DuplicateParam(_))));
    }

    #[test]
    fn soft_update_arithmetic() {
        let mut online = ParamStore::new();
        online.register("p", Tensor::row(&[0.0, 4.0])).unwrap();
        let mut target = ParamStore::new();
        target.register("p", Tensor::row(&[2.0, 2.0])).unwrap();

        let mut t = target.clone();
        t.soft_update_from(&online, 0.5).unwrap();
        assert_eq!(t.get("p").unwrap().data(), &[1.0, 3.0]);

        let mut t = target.clone();
        t.soft_update_from(&online, 1.0).unwrap();
        assert_eq!(t.get("p").unwrap().data(), online.get("p").unwrap().data());

        let mut t = target.clone();
        t.soft_update_from(&online, 0.0).unwrap();
        assert_eq!(t.get("p").unwrap().data(), target.get("p").unwrap().data());

        let mut other = ParamStore::new();
        other.register("q", Tensor::row(&[0.0, 0.0])).unwrap();
        assert!(t.soft_update_from(&other, 0.5).is_err());
    }
}
