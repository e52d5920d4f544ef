use rand::Rng;

use super::coupling::CouplingLayer;
use super::FlowError;
use crate::diffcore::{ParamStore, Tape, Tensor, Var};

/// Shape of a coupling stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlowSpec {
    pub dim: usize,
    pub layers: usize,
    pub hidden: usize,
    /// Width of the conditioning embedding; 0 for an unconditioned flow.
    pub cond_dim: usize,
}

/// Stack of affine couplings that alternate which half they transform.
#[derive(Clone, Debug)]
pub struct FlowModel {
    spec: FlowSpec,
    tag: String,
    layers: Vec<CouplingLayer>,
}

/// Result of a forward pass over `[n, d]` rows.
pub struct FlowOutput {
    pub z: Var,
    /// Total per-row log-determinant, `[n, 1]`.
    pub logdet: Var,
    pub layer_logdets: Vec<Var>,
}

impl FlowModel {
    /// Registers parameters under `flow.<tag>.layer<i>`. Output layers of the
    /// scale and shift nets start at zero, so a fresh flow is the identity.
    pub fn new(store: &mut ParamStore, tag: &str, spec: FlowSpec, rng: &mut impl Rng) -> Result<Self, FlowError> {
        if spec.dim == 0 || !spec.dim.is_multiple_of(2) {
            return Err(FlowError::OddDimension(spec.dim));
        }
        if spec.layers == 0 {
            return Err(FlowError::Contract("a flow needs at least one coupling layer".into()));
        }
        let layers = (0..spec.layers)
            .map(|i| {
                CouplingLayer::new(store, &format!("flow.{tag}.layer{i}"), spec.dim, spec.hidden, spec.cond_dim, i % 2 == 0, rng)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { spec, tag: tag.to_string(), layers })
    }

    pub fn spec(&self) -> FlowSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    fn check_cond(&self, tape: &Tape, x: Var, cond: Option<Var>) {
        match cond {
            Some(c) => {
                let (xs, cs) = (tape.shape(x), tape.shape(c));
                assert!(self.spec.cond_dim == cs[1] && xs[0] == cs[0], "flow {}: condition {:?} for input {:?}", self.tag, cs, xs);
            }
            None => assert!(self.spec.cond_dim == 0, "flow {} expects a condition", self.tag),
        }
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, x: Var, cond: Option<Var>) -> FlowOutput {
        self.check_cond(tape, x, cond);
        let mut h = x;
        let mut layer_logdets = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let out = layer.forward(tape, store, h, cond);
            h = out.y;
            layer_logdets.push(out.logdet);
        }
        let logdet = tape.add_all(&layer_logdets);
        FlowOutput { z: h, logdet, layer_logdets }
    }

    pub fn inverse(&self, tape: &Tape, store: &ParamStore, z: Var, cond: Option<Var>) -> Var {
        self.check_cond(tape, z, cond);
        self.layers.iter().rev().fold(z, |h, layer| layer.inverse(tape, store, h, cond))
    }

    fn check_vector(&self, v: &[f64], cond: Option<&[f64]>) -> Result<(), FlowError> {
        if v.len() != self.spec.dim {
            return Err(FlowError::DimMismatch { expected: self.spec.dim, got: v.len() });
        }
        match (cond, self.spec.cond_dim) {
            (None, 0) => Ok(()),
            (Some(c), k) if c.len() == k && k > 0 => Ok(()),
            (c, k) => Err(FlowError::DimMismatch { expected: k, got: c.map_or(0, <[f64]>::len) }),
        }
    }
}

/// `z = f(x; cond)` and `log |det df/dx|` for a single vector.
pub fn flow_forward(
    x: &[f64],
    cond: Option<&[f64]>,
    model: &FlowModel,
    store: &ParamStore,
) -> Result<(Vec<f64>, f64), FlowError> {
    model.check_vector(x, cond)?;
    let tape = Tape::new();
    let xv = tape.constant(Tensor::row(x.to_vec()));
    let cv = cond.map(|c| tape.constant(Tensor::row(c.to_vec())));
    let out = model.forward(&tape, store, xv, cv);
    let logdet = tape.value(out.logdet).values()[0];
    Ok((tape.value(out.z).into_values(), logdet))
}

/// `x = f^{-1}(z; cond)` for a single vector.
pub fn flow_inverse(z: &[f64], cond: Option<&[f64]>, model: &FlowModel, store: &ParamStore) -> Result<Vec<f64>, FlowError> {
    model.check_vector(z, cond)?;
    let tape = Tape::new();
    let zv = tape.constant(Tensor::row(z.to_vec()));
    let cv = cond.map(|c| tape.constant(Tensor::row(c.to_vec())));
    Ok(tape.value(model.inverse(&tape, store, zv, cv)).into_values())
}

/// Row-batched forward pass over an `[n, d]` matrix: latents and per-row log-determinants.
pub fn flow_forward_rows(x: &Tensor, model: &FlowModel, store: &ParamStore) -> (Tensor, Vec<f64>) {
    let tape = Tape::new();
    let out = model.forward(&tape, store, tape.constant(x.clone()), None);
    (tape.value(out.z), tape.value(out.logdet).into_values())
}

/// Row-batched inverse over an `[n, d]` matrix.
pub fn flow_inverse_rows(z: &Tensor, model: &FlowModel, store: &ParamStore) -> Tensor {
    let tape = Tape::new();
    let x = model.inverse(&tape, store, tape.constant(z.clone()), None);
    tape.value(x)
}
