//! Central finite-difference checks of analytic gradients.

use serde::Serialize;

use super::{NnError, ParamStore, Tape, Var};

/// Denominators of relative errors never drop below this, so a parameter
/// whose true gradient is zero is judged on absolute error.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub elements: usize,
    /// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂, FLOOR)` over
    /// the whole tensor; this is what passes or fails.
    pub rel_err: f64,
    /// Worst single-element `|a − n| / max(|a|, |n|, FLOOR)`. Elements with
    /// gradients near the floor are dominated by round-off in the loss.
    pub max_elem_rel_err: f64,
    pub max_abs_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub label: String,
    pub tolerance: f64,
    /// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂, FLOOR)` over
    /// every parameter of the check at once.
    pub rel_err: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.rel_err
    }

    pub fn passed(&self) -> bool {
        self.rel_err < self.tolerance
    }

    /// Parameters whose own relative error reaches the tolerance.
    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(|p| p.rel_err >= self.tolerance)
    }
}

/// Compares every parameter's analytic gradient with
/// `(L(θ+ε) − L(θ−ε)) / 2ε`.
///
/// `loss` must be deterministic: it is re-evaluated twice per parameter
/// element, so any randomness inside it has to be re-seeded on each call.
pub fn grad_check<F>(label: &str, store: &ParamStore, loss: F, eps: f64, tolerance: f64) -> Result<GradCheckReport, NnError>
where
    F: Fn(&mut Tape<'_>) -> Result<Var, NnError>,
{
    let analytic = {
        let mut tape = Tape::new(store);
        let l = loss(&mut tape)?;
        tape.backward(l)?
    };
    let eval = |s: &ParamStore| -> Result<f64, NnError> {
        let mut tape = Tape::new(s);
        let l = loss(&mut tape)?;
        tape.value(l).item().ok_or(NnError::NotScalar(tape.value(l).shape()))
    };

    let mut probe = store.clone();
    let mut params = Vec::with_capacity(store.len());
    let (mut total_diff2, mut total_exact2, mut total_numeric2) = (0.0, 0.0, 0.0);
    for id in store.ids() {
        let n = store.value(id).len();
        let mut check = ParamCheck {
            name: store.name(id).to_string(),
            elements: n,
            rel_err: 0.0,
            max_elem_rel_err: 0.0,
            max_abs_err: 0.0,
        };
        let (mut diff2, mut exact2, mut numeric2) = (0.0, 0.0, 0.0);
        for k in 0..n {
            let orig = store.value(id).data()[k];
            probe.value_mut(id).data_mut()[k] = orig + eps;
            let up = eval(&probe)?;
            probe.value_mut(id).data_mut()[k] = orig - eps;
            let down = eval(&probe)?;
            probe.value_mut(id).data_mut()[k] = orig;

            let numeric = (up - down) / (2.0 * eps);
            let exact = analytic.get(id).map_or(0.0, |g| g.data()[k]);
            let abs = (numeric - exact).abs();
            let rel = abs / exact.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            check.max_abs_err = check.max_abs_err.max(abs);
            check.max_elem_rel_err = check.max_elem_rel_err.max(rel);
            diff2 += abs * abs;
            exact2 += exact * exact;
            numeric2 += numeric * numeric;
        }
        check.rel_err = diff2.sqrt() / exact2.sqrt().max(numeric2.sqrt()).max(RELATIVE_FLOOR);
        total_diff2 += diff2;
        total_exact2 += exact2;
        total_numeric2 += numeric2;
        params.push(check);
    }
    Ok(GradCheckReport {
        label: label.to_string(),
        tolerance,
        rel_err: total_diff2.sqrt() / total_exact2.sqrt().max(total_numeric2.sqrt()).max(RELATIVE_FLOOR),
        params,
    })
}
