use rand::Rng;

use super::mlp::{Activation, Mlp};
use crate::diffcore::{DiffError, ParamStore, Tape, Var};

/// Bound on effective log-scales: `s = S_MAX * tanh(raw)`.
pub const S_MAX: f64 = 2.0;

/// Affine coupling: one half of the dimensions passes through unchanged and
/// parameterizes a scale and shift of the other half.
#[derive(Clone, Debug)]
pub struct CouplingLayer {
    half: usize,
    /// When false the first half is transformed, conditioned on the second.
    transform_second: bool,
    cond_dim: usize,
    scale_net: Mlp,
    shift_net: Mlp,
}

/// Output of a coupling pass over `[n, d]` rows.
pub struct CouplingOutput {
    pub y: Var,
    /// Per-row log-determinant, `[n, 1]`.
    pub logdet: Var,
}

impl CouplingLayer {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        hidden: usize,
        cond_dim: usize,
        transform_second: bool,
        rng: &mut impl Rng,
    ) -> Result<Self, DiffError> {
        let half = dim / 2;
        let input = half + cond_dim;
        let scale_net = Mlp::new(store, &format!("{prefix}.s"), input, hidden, half, Activation::Tanh, true, rng)?;
        let shift_net = Mlp::new(store, &format!("{prefix}.t"), input, hidden, half, Activation::Tanh, true, rng)?;
        Ok(Self { half, transform_second, cond_dim, scale_net, shift_net })
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    fn split(&self, tape: &Tape, x: Var) -> (Var, Var) {
        let d = 2 * self.half;
        let first = tape.slice_cols(x, 0, self.half);
        let second = tape.slice_cols(x, self.half, d);
        if self.transform_second {
            (first, second)
        } else {
            (second, first)
        }
    }

    fn join(&self, tape: &Tape, passive: Var, active: Var) -> Var {
        if self.transform_second {
            tape.concat_cols(passive, active)
        } else {
            tape.concat_cols(active, passive)
        }
    }

    /// Effective log-scale and shift computed from the passive half.
    fn scale_shift(&self, tape: &Tape, store: &ParamStore, passive: Var, cond: Option<Var>) -> (Var, Var) {
        let input = match cond {
            Some(c) => tape.concat_cols(passive, c),
            None => passive,
        };
        let raw = self.scale_net.forward(tape, store, input);
        let log_scale = tape.scale(tape.tanh(raw), S_MAX);
        let shift = self.shift_net.forward(tape, store, input);
        (log_scale, shift)
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, x: Var, cond: Option<Var>) -> CouplingOutput {
        let (passive, active) = self.split(tape, x);
        let (log_scale, shift) = self.scale_shift(tape, store, passive, cond);
        let active = tape.add(tape.mul(active, tape.exp(log_scale)), shift);
        let ones = tape.constant(crate::diffcore::Tensor::filled(&[self.half, 1], 1.0));
        CouplingOutput { y: self.join(tape, passive, active), logdet: tape.matmul(log_scale, ones) }
    }

    pub fn inverse(&self, tape: &Tape, store: &ParamStore, y: Var, cond: Option<Var>) -> Var {
        let (passive, active) = self.split(tape, y);
        let (log_scale, shift) = self.scale_shift(tape, store, passive, cond);
        let active = tape.mul(tape.sub(active, shift), tape.exp(tape.neg(log_scale)));
        self.join(tape, passive, active)
    }
}
