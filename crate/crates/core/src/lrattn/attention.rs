use std::fmt::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::AttnError;
use crate::diffcore::{stable_softmax, Tensor};

/// Projections for one low-rank attention head. `w_q`, `w_k`, `w_v` are
/// `d x d`; `u` and `u_v` are `d x d_r`; the bilinear core `a` is `d_r x d_r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowRankAttentionParams {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub u: Tensor,
    pub a: Tensor,
    pub u_v: Tensor,
}

/// Output rows (`T x d_r`) together with the row-stochastic weights (`T x T`).
#[derive(Clone, Debug, PartialEq)]
pub struct Attention {
    pub output: Tensor,
    pub weights: Tensor,
}

impl LowRankAttentionParams {
    pub fn new(w_q: Tensor, w_k: Tensor, w_v: Tensor, u: Tensor, a: Tensor, u_v: Tensor) -> Result<Self, AttnError> {
        let p = Self { w_q, w_k, w_v, u, a, u_v };
        p.validate()?;
        Ok(p)
    }

    /// All six matrices set to identities of size `d` (so `d_r = d`).
    pub fn identity(d: usize) -> Self {
        let i = Tensor::identity(d);
        Self { w_q: i.clone(), w_k: i.clone(), w_v: i.clone(), u: i.clone(), a: i.clone(), u_v: i }
    }

    /// Gaussian entries scaled by `1/sqrt(fan_in)`.
    pub fn random(d: usize, d_r: usize, rng: &mut impl Rng) -> Result<Self, AttnError> {
        check_rank(d, d_r)?;
        let mut m = |r: usize, c: usize| {
            let std = (r as f64).recip().sqrt();
            Tensor::matrix(r, c, (0..r * c).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect())
        };
        Ok(Self { w_q: m(d, d), w_k: m(d, d), w_v: m(d, d), u: m(d, d_r), a: m(d_r, d_r), u_v: m(d, d_r) })
    }

    pub fn d(&self) -> usize {
        self.w_q.rows()
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn validate(&self) -> Result<(), AttnError> {
        let d = self.d();
        let r = self.rank();
        check_rank(d, r)?;
        let expect = [
            ("W_Q", &self.w_q, d, d),
            ("W_K", &self.w_k, d, d),
            ("W_V", &self.w_v, d, d),
            ("U", &self.u, d, r),
            ("A", &self.a, r, r),
            ("U_V", &self.u_v, d, r),
        ];
        for (name, m, rows, cols) in expect {
            if m.shape() != [rows, cols] {
                return Err(AttnError::Shape(format!("{name} is {:?}, expected [{rows}, {cols}]", m.shape())));
            }
            if !m.all_finite() {
                return Err(AttnError::NonFinite(name));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_rank(d: usize, d_r: usize) -> Result<(), AttnError> {
    if d_r == 0 {
        return Err(AttnError::ZeroRank);
    }
    if d_r > d {
        return Err(AttnError::RankTooLarge { rank: d_r, d });
    }
    Ok(())
}

fn check_input(x: &Tensor, d: usize) -> Result<(), AttnError> {
    if x.shape().len() != 2 || x.cols() != d {
        return Err(AttnError::Shape(format!("input {:?} for model width {d}", x.shape())));
    }
    if x.rows() == 0 {
        return Err(AttnError::NoTokens);
    }
    if !x.all_finite() {
        return Err(AttnError::NonFinite("input"));
    }
    Ok(())
}

fn softmax_rows(mut scores: Tensor) -> Tensor {
    let c = scores.cols();
    for row in scores.values_mut().chunks_mut(c) {
        let s = stable_softmax(row).expect("finite scores");
        row.copy_from_slice(&s);
    }
    scores
}

/// `softmax((XW_Q U) A (XW_K U)ᵀ / sqrt(d_r)) · (XW_V U_V)`.
pub fn low_rank_attention(x: &Tensor, params: &LowRankAttentionParams) -> Result<Attention, AttnError> {
    params.validate()?;
    check_input(x, params.d())?;
    let q = x.matmul(&params.w_q);
    let k = x.matmul(&params.w_k);
    let v = x.matmul(&params.w_v);
    let ku = k.matmul(&params.u);
    let qa = q.matmul(&params.u).matmul(&params.a);
    let mut scores = qa.matmul(&ku.transpose());
    scores.scale_assign((params.rank() as f64).sqrt().recip());
    let weights = softmax_rows(scores);
    let output = weights.matmul(&v.matmul(&params.u_v));
    Ok(Attention { output, weights })
}

/// Standard scaled dot-product attention `softmax(QKᵀ/sqrt(d)) V`.
pub fn dense_attention(x: &Tensor, w_q: &Tensor, w_k: &Tensor, w_v: &Tensor) -> Result<Attention, AttnError> {
    let d = w_q.rows();
    check_input(x, d)?;
    let q = x.matmul(w_q);
    let k = x.matmul(w_k);
    let mut scores = q.matmul(&k.transpose());
    scores.scale_assign((d as f64).sqrt().recip());
    let weights = softmax_rows(scores);
    let output = weights.matmul(&x.matmul(w_v));
    Ok(Attention { output, weights })
}

/// CSV with header `row,col,weight`, one line per matrix entry.
pub fn attention_weights_csv(weights: &Tensor) -> String {
    let mut out = String::from("row,col,weight\n");
    for i in 0..weights.rows() {
        for j in 0..weights.cols() {
            writeln!(out, "{i},{j},{}", weights.get(i, j)).unwrap();
        }
    }
    out
}
