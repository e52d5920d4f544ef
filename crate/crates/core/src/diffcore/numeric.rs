use super::DiffError;

/// Softmax with max-shift; output sums to one.
pub fn stable_softmax(v: &[f64]) -> Result<Vec<f64>, DiffError> {
    if v.is_empty() {
        return Err(DiffError::EmptyInput("stable_softmax"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(DiffError::NonFiniteInput("stable_softmax"));
    }
    let mut out = v.to_vec();
    super::tape::softmax_in_place(&mut out);
    Ok(out)
}

/// `ln(sum(exp(v)))` evaluated around the maximum.
pub fn log_sum_exp(v: &[f64]) -> Result<f64, DiffError> {
    if v.is_empty() {
        return Err(DiffError::EmptyInput("log_sum_exp"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(DiffError::NonFiniteInput("log_sum_exp"));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln())
}
