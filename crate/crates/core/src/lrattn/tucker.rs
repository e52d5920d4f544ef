use serde::{Deserialize, Serialize};

use super::AttnError;
use crate::diffcore::Tensor;

/// `d x d` matrix stored as `P · S_core · Rᵀ` with `P, R: d x d_r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuckerFactors {
    pub p: Tensor,
    pub s_core: Tensor,
    pub r: Tensor,
}

impl TuckerFactors {
    pub fn new(p: Tensor, s_core: Tensor, r: Tensor) -> Result<Self, AttnError> {
        let (d, k) = (p.rows(), p.cols());
        if r.rows() != d || r.cols() != k || s_core.rows() != k || s_core.cols() != k {
            return Err(AttnError::Shape(format!(
                "tucker factors P {:?}, S_core {:?}, R {:?}",
                p.shape(),
                s_core.shape(),
                r.shape()
            )));
        }
        Ok(Self { p, s_core, r })
    }

    pub fn rank(&self) -> usize {
        self.s_core.rows()
    }
}

pub fn tucker_materialize(f: &TuckerFactors) -> Tensor {
    f.p.matmul(&f.s_core).matmul(&f.r.transpose())
}
