//! The mean-field Q-network `Q(o, ·, ā)`: an MLP over the observation
//! concatenated with a mean action, one output per action.

use rand::Rng;

use crate::nncore::layers;
use crate::nncore::{NnError, ParamStore, Tape, Tensor, Var};

/// Critic parameter prefix.
pub const Q_PREFIX: &str = "q";
/// Actor parameter prefix (actor-critic learners).
pub const ACTOR_PREFIX: &str = "actor";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QNet {
    pub feature_len: usize,
    pub n_actions: usize,
    pub hidden: usize,
}

impl QNet {
    /// `(F + L) → hidden → hidden → L` under `prefix`.
    pub fn register<R: Rng + ?Sized>(&self, store: &mut ParamStore, prefix: &str, rng: &mut R) -> Result<(), NnError> {
        layers::register_mlp(
            store,
            prefix,
            &[self.feature_len + self.n_actions, self.hidden, self.hidden, self.n_actions],
            rng,
        )
    }

    pub fn forward(&self, tape: &mut Tape<'_>, prefix: &str, obs: Var, mean: Var) -> Result<Var, NnError> {
        let (o, m) = (tape.value(obs).shape(), tape.value(mean).shape());
        if o[1] != self.feature_len || m[1] != self.n_actions || o[0] != m[0] {
            return Err(NnError::Shape(format!("q-network input obs {o:?}, mean {m:?}")));
        }
        let x = tape.concat_cols(&[obs, mean])?;
        layers::mlp(tape, x, prefix, 3)
    }

    /// Forward pass without gradients.
    pub fn evaluate(&self, store: &ParamStore, prefix: &str, obs: &Tensor, mean: &Tensor) -> Result<Tensor, NnError> {
        let mut tape = Tape::new(store);
        let o = tape.constant(obs.clone());
        let m = tape.constant(mean.clone());
        let q = self.forward(&mut tape, prefix, o, m)?;
        Ok(tape.value(q).clone())
    }
}
