use super::FlowError;
use crate::diffcore::{ParamId, ParamStore, Tape, Tensor, Var};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Per-class diagonal Gaussians `N(mu_c, diag(exp(log_var_c)))` in latent space.
///
/// Class ids are 1-based.
#[derive(Clone, Debug)]
pub struct ClassPrior {
    pub means: ParamId,
    pub log_vars: ParamId,
    classes: usize,
    dim: usize,
}

/// Zero means and unit variances for `classes` classes in `dim` dimensions,
/// all trainable.
pub fn init_class_prior(store: &mut ParamStore, classes: usize, dim: usize) -> Result<ClassPrior, FlowError> {
    if classes == 0 || dim == 0 {
        return Err(FlowError::Contract(format!("class prior needs C >= 1 and d >= 1, got C={classes}, d={dim}")));
    }
    let means = store.insert_zeros("prior.means", classes, dim)?;
    let log_vars = store.insert_zeros("prior.log_vars", classes, dim)?;
    Ok(ClassPrior { means, log_vars, classes, dim })
}

impl ClassPrior {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn check_class(&self, class: usize) -> Result<(), FlowError> {
        if class == 0 || class > self.classes {
            return Err(FlowError::UnknownClass { class, classes: self.classes });
        }
        Ok(())
    }

    pub fn mean(&self, store: &ParamStore, class: usize) -> Vec<f64> {
        store.get(self.means).row_slice(class - 1).to_vec()
    }

    /// Summed log-density of the rows of `z` under class `class`.
    pub fn logpdf(&self, tape: &Tape, store: &ParamStore, z: Var, class: usize) -> Var {
        assert!((1..=self.classes).contains(&class), "class {class} outside 1..={}", self.classes);
        let rows = tape.shape(z)[0] as f64;
        let mu = tape.select_row(tape.param(store, self.means), class - 1);
        let log_var = tape.select_row(tape.param(store, self.log_vars), class - 1);
        let diff = tape.add_row(z, tape.neg(mu));
        let inv_var = tape.exp(tape.neg(log_var));
        let quad = tape.sum(tape.mul_row(tape.mul(diff, diff), inv_var));
        let log_det = tape.scale(tape.sum(log_var), -0.5 * rows);
        let norm = tape.constant_scalar(-0.5 * rows * self.dim as f64 * LN_2PI);
        tape.add(tape.add(norm, log_det), tape.scale(quad, -0.5))
    }
}

/// Log-density of a single latent vector under class `class`.
pub fn class_prior_logpdf(z: &[f64], class: usize, prior: &ClassPrior, store: &ParamStore) -> Result<f64, FlowError> {
    prior.check_class(class)?;
    if z.len() != prior.dim {
        return Err(FlowError::DimMismatch { expected: prior.dim, got: z.len() });
    }
    let tape = Tape::new();
    let zv = tape.constant(Tensor::row(z.to_vec()));
    Ok(tape.scalar(prior.logpdf(&tape, store, zv, class)))
}

/// Most likely class for a latent vector.
pub fn infer_class(z: &[f64], prior: &ClassPrior, store: &ParamStore) -> Result<usize, FlowError> {
    let mut best = (1, f64::NEG_INFINITY);
    for c in 1..=prior.classes {
        let lp = class_prior_logpdf(z, c, prior, store)?;
        if lp > best.1 {
            best = (c, lp);
        }
    }
    Ok(best.0)
}
