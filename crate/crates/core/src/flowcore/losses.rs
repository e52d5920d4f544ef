use super::{ClassPrior, Decoder, FlowError, FlowModel};
use crate::diffcore::{ParamStore, Tape, Tensor, Var};

/// Distribution-consistency loss: negative class-conditional log-likelihood
/// of the rows of `x` through the flow (prior log-density plus log-determinant).
pub fn cdt_loss_tape(tape: &Tape, store: &ParamStore, x: Var, class: usize, flow: &FlowModel, prior: &ClassPrior) -> Var {
    let out = flow.forward(tape, store, x, None);
    let logp = prior.logpdf(tape, store, out.z, class);
    tape.neg(tape.add(logp, tape.sum(out.logdet)))
}

pub fn cdt_loss(x: &[f64], class: usize, flow: &FlowModel, prior: &ClassPrior, store: &ParamStore) -> Result<f64, FlowError> {
    prior.check_class(class)?;
    if x.len() != flow.dim() {
        return Err(FlowError::DimMismatch { expected: flow.dim(), got: x.len() });
    }
    let tape = Tape::new();
    let xv = tape.constant(Tensor::row(x.to_vec()));
    Ok(tape.scalar(cdt_loss_tape(&tape, store, xv, class, flow, prior)))
}

/// Inverse flow of the fused latent, then decoder refinement: `(x_tilde, x_hat)`.
pub fn recover_missing_tape(tape: &Tape, store: &ParamStore, fused: Var, flow: &FlowModel, decoder: &Decoder) -> (Var, Var) {
    let x_tilde = flow.inverse(tape, store, fused, None);
    let x_hat = decoder.forward(tape, store, x_tilde);
    (x_tilde, x_hat)
}

pub fn recover_missing(
    fused: &[f64],
    flow: &FlowModel,
    decoder: &Decoder,
    store: &ParamStore,
) -> Result<(Vec<f64>, Vec<f64>), FlowError> {
    if fused.len() != flow.dim() {
        return Err(FlowError::DimMismatch { expected: flow.dim(), got: fused.len() });
    }
    let tape = Tape::new();
    let z = tape.constant(Tensor::row(fused.to_vec()));
    let (xt, xh) = recover_missing_tape(&tape, store, z, flow, decoder);
    Ok((tape.value(xt).into_values(), tape.value(xh).into_values()))
}

/// Round-trip reconstruction error `||f^{-1}(f(x; c); c) - x||^2`, averaged
/// over the rows of `x`. Zero up to rounding for an exact flow.
pub fn recon_loss_tape(tape: &Tape, store: &ParamStore, x: Var, cond: Option<Var>, flow: &FlowModel) -> Var {
    let rows = tape.shape(x)[0] as f64;
    let z = flow.forward(tape, store, x, cond).z;
    let back = flow.inverse(tape, store, z, cond);
    tape.scale(tape.sum_sq(tape.sub(back, x)), 1.0 / rows)
}

pub fn recon_loss(x: &Tensor, cond: Option<&Tensor>, flow: &FlowModel, store: &ParamStore) -> Result<f64, FlowError> {
    if x.cols() != flow.dim() {
        return Err(FlowError::DimMismatch { expected: flow.dim(), got: x.cols() });
    }
    let tape = Tape::new();
    let xv = tape.constant(x.clone());
    let cv = cond.map(|c| tape.constant(c.clone()));
    Ok(tape.scalar(recon_loss_tape(&tape, store, xv, cv, flow)))
}

/// Squared Frobenius distance between real and generated hidden states.
pub fn align_loss_tape(tape: &Tape, h_real: Var, h_gen: Var) -> Var {
    tape.sum_sq(tape.sub(h_gen, h_real))
}

pub fn align_loss(h_real: &Tensor, h_gen: &Tensor) -> Result<f64, FlowError> {
    if h_real.shape() != h_gen.shape() {
        return Err(FlowError::Contract(format!("align_loss shape mismatch {:?} vs {:?}", h_real.shape(), h_gen.shape())));
    }
    Ok(h_gen.zip_map(h_real, |a, b| a - b).sum_sq())
}
