use rand::Rng;

use crate::diffcore::{DiffError, ParamId, ParamStore, Tape, Var};

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Gelu,
}

/// `act(x W1 + b1) W2 + b2` over the rows of `x`.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub activation: Activation,
}

impl Mlp {
    /// First layer ~ N(0, 1/fan_in); the output layer starts at zero when
    /// `zero_output` is set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        output: usize,
        activation: Activation,
        zero_output: bool,
        rng: &mut impl Rng,
    ) -> Result<Self, DiffError> {
        let w1 = store.insert_normal(format!("{prefix}.w1"), input, hidden, (input as f64).recip().sqrt(), rng)?;
        let b1 = store.insert_zeros(format!("{prefix}.b1"), 1, hidden)?;
        let w2 = if zero_output {
            store.insert_zeros(format!("{prefix}.w2"), hidden, output)?
        } else {
            store.insert_normal(format!("{prefix}.w2"), hidden, output, (hidden as f64).recip().sqrt(), rng)?
        };
        let b2 = store.insert_zeros(format!("{prefix}.b2"), 1, output)?;
        Ok(Self { w1, b1, w2, b2, activation })
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, x: Var) -> Var {
        let h = tape.add_row(tape.matmul(x, tape.param(store, self.w1)), tape.param(store, self.b1));
        let h = match self.activation {
            Activation::Tanh => tape.tanh(h),
            Activation::Gelu => tape.gelu(h),
        };
        tape.add_row(tape.matmul(h, tape.param(store, self.w2)), tape.param(store, self.b2))
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.get(self.w1).rows()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        store.get(self.w2).cols()
    }
}
