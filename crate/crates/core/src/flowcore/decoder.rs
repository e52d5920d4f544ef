use rand::Rng;

use super::mlp::{Activation, Mlp};
use crate::diffcore::{DiffError, ParamStore, Tape, Var};

/// Residual refinement `x + mlp(x)`; identity while the output layer is zero.
#[derive(Clone, Debug)]
pub struct Decoder {
    net: Mlp,
}

impl Decoder {
    pub fn new(store: &mut ParamStore, tag: &str, dim: usize, hidden: usize, rng: &mut impl Rng) -> Result<Self, DiffError> {
        let net = Mlp::new(store, &format!("decoder.{tag}"), dim, hidden, dim, Activation::Gelu, true, rng)?;
        Ok(Self { net })
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, x: Var) -> Var {
        tape.add(x, self.net.forward(tape, store, x))
    }
}
