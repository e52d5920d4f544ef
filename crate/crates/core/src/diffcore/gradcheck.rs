//! Central finite-difference gradient checking.

use super::{DiffError, ParamStore, Tape, Var};

/// Outcome of a finite-difference comparison.
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Largest per-component relative error.
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst component.
    pub worst: Option<(String, usize)>,
    pub components: usize,
}

/// Denominator floor for the relative error, so components whose true
/// gradient is zero compare on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares tape gradients of `loss_fn` against central differences with
/// step `h` for every component of every parameter in `store`.
///
/// Values passed through [`Tape::detach`] are held at their reference-pass
/// values during the perturbed evaluations, matching the stop-gradient
/// semantics of the analytic pass.
pub fn check_gradients<F>(store: &ParamStore, h: f64, loss_fn: F) -> Result<GradCheck, DiffError>
where
    F: Fn(&Tape, &ParamStore) -> Var,
{
    let tape = Tape::new();
    let loss = loss_fn(&tape, store);
    let analytic = tape.backward(loss, store)?;
    let frozen = tape.detached_values();

    let eval = |s: &ParamStore| {
        let t = Tape::with_frozen_detaches(frozen.clone());
        let l = loss_fn(&t, s);
        t.scalar(l)
    };

    let mut probe = store.clone();
    let mut result = GradCheck { max_rel_error: 0.0, worst: None, components: 0 };
    for id in store.ids() {
        for j in 0..store.get(id).len() {
            let orig = store.get(id).values()[j];
            probe.get_mut(id).values_mut()[j] = orig + h;
            let up = eval(&probe);
            probe.get_mut(id).values_mut()[j] = orig - h;
            let down = eval(&probe);
            probe.get_mut(id).values_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic.get(id).values()[j], numeric);
            result.components += 1;
            if result.worst.is_none() || err > result.max_rel_error {
                result.max_rel_error = err;
                result.worst = Some((store.name(id).to_string(), j));
            }
        }
    }
    Ok(result)
}
