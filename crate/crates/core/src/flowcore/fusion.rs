use super::FlowError;
use crate::diffcore::{ParamId, ParamStore, Tape, Tensor, Var};

/// How observed-modality latents are combined.
#[derive(Clone, Debug, PartialEq)]
pub enum Fusion {
    Mean,
    /// Softmax over per-modality logits (a `[1, M]` parameter), restricted to
    /// the modalities actually observed.
    Learned { logits: ParamId },
}

/// Fuses `(modality slot, latent)` pairs on the tape.
pub fn fuse_latents_tape(tape: &Tape, store: &ParamStore, latents: &[(usize, Var)], fusion: &Fusion) -> Var {
    assert!(!latents.is_empty(), "fuse_latents: no observed latents");
    if latents.len() == 1 {
        return latents[0].1;
    }
    match fusion {
        Fusion::Mean => {
            let vars: Vec<Var> = latents.iter().map(|&(_, v)| v).collect();
            tape.scale(tape.add_all(&vars), 1.0 / latents.len() as f64)
        }
        Fusion::Learned { logits } => {
            let all = tape.param(store, *logits);
            let m = tape.shape(all)[1];
            let mut select = Tensor::zeros(&[m, latents.len()]);
            for (j, &(slot, _)) in latents.iter().enumerate() {
                select.set(slot, j, 1.0);
            }
            let weights = tape.softmax_rows(tape.matmul(all, tape.constant(select)));
            let parts: Vec<Var> =
                latents.iter().enumerate().map(|(j, &(_, v))| tape.scale_by(v, tape.element(weights, j))).collect();
            tape.add_all(&parts)
        }
    }
}

/// Convex combination of latent vectors. `weights = None` is the plain mean;
/// explicit weights must be non-negative and sum to one.
pub fn fuse_latents(latents: &[Vec<f64>], weights: Option<&[f64]>) -> Result<Vec<f64>, FlowError> {
    let first = latents.first().ok_or_else(|| FlowError::Contract("fuse_latents needs at least one latent".into()))?;
    let d = first.len();
    if let Some(bad) = latents.iter().find(|l| l.len() != d) {
        return Err(FlowError::DimMismatch { expected: d, got: bad.len() });
    }
    let uniform = vec![1.0 / latents.len() as f64; latents.len()];
    let w = match weights {
        Some(w) => {
            if w.len() != latents.len() || w.iter().any(|&x| x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(FlowError::Contract(format!("fusion weights must be a probability vector over {} latents", latents.len())));
            }
            w
        }
        None if latents.len() == 1 => return Ok(first.clone()),
        None => &uniform,
    };
    let mut out = vec![0.0; d];
    for (l, &wi) in latents.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(l) {
            *o += wi * x;
        }
    }
    Ok(out)
}
