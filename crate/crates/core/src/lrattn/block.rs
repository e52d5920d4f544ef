use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::check_rank;
use super::{tucker_materialize, AttnError, LowRankAttentionParams, TuckerFactors};
use crate::diffcore::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::flowcore::{Activation, Mlp};

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrmtConfig {
    /// Token width.
    pub d: usize,
    /// Attention rank per head.
    pub d_r: usize,
    pub heads: usize,
    /// Tucker-factorize W_Q, W_K, W_V (independent factors per projection).
    pub tucker: bool,
    pub ffn_hidden: usize,
}

impl LrmtConfig {
    pub fn new(d: usize, d_r: usize) -> Self {
        Self { d, d_r, heads: 1, tucker: true, ffn_hidden: 2 * d }
    }

    pub fn validate(&self) -> Result<(), AttnError> {
        check_rank(self.d, self.d_r)?;
        if self.heads == 0 || self.ffn_hidden == 0 {
            return Err(AttnError::Shape("heads and ffn_hidden must be positive".into()));
        }
        Ok(())
    }
}

/// A `d x d` projection held either densely or as Tucker factors.
#[derive(Clone, Debug)]
pub enum Projection {
    Dense(ParamId),
    Tucker { p: ParamId, s_core: ParamId, r: ParamId },
}

impl Projection {
    fn new(store: &mut ParamStore, prefix: &str, cfg: &LrmtConfig, rng: &mut impl Rng) -> Result<Self, AttnError> {
        let (d, k) = (cfg.d, cfg.d_r);
        if !cfg.tucker {
            let w = store.insert_normal(format!("{prefix}.w"), d, d, (d as f64).recip().sqrt(), rng)?;
            return Ok(Self::Dense(w));
        }
        // Equal std for all three factors so the product has entry variance 1/d.
        let std = ((d * k * k) as f64).powf(-1.0 / 6.0);
        Ok(Self::Tucker {
            p: store.insert_normal(format!("{prefix}.p"), d, k, std, rng)?,
            s_core: store.insert_normal(format!("{prefix}.s_core"), k, k, std, rng)?,
            r: store.insert_normal(format!("{prefix}.r"), d, k, std, rng)?,
        })
    }

    fn var(&self, tape: &Tape, store: &ParamStore) -> Var {
        match *self {
            Self::Dense(w) => tape.param(store, w),
            Self::Tucker { p, s_core, r } => {
                let ps = tape.matmul(tape.param(store, p), tape.param(store, s_core));
                tape.matmul(ps, tape.transpose(tape.param(store, r)))
            }
        }
    }

    pub fn materialize(&self, store: &ParamStore) -> Tensor {
        match *self {
            Self::Dense(w) => store.get(w).clone(),
            Self::Tucker { p, s_core, r } => tucker_materialize(&TuckerFactors {
                p: store.get(p).clone(),
                s_core: store.get(s_core).clone(),
                r: store.get(r).clone(),
            }),
        }
    }
}

#[derive(Clone, Debug)]
struct Head {
    u: ParamId,
    a: ParamId,
    u_v: ParamId,
}

/// Pre-norm transformer block with low-rank bilinear attention:
/// `X1 = X + Attn(LN(X)) W_O`, `X2 = X1 + FFN(LN(X1))`, output `LN(X2)`.
#[derive(Clone, Debug)]
pub struct LrmtBlock {
    config: LrmtConfig,
    q: Projection,
    k: Projection,
    v: Projection,
    heads: Vec<Head>,
    /// Re-projection from the concatenated head outputs back to width `d`.
    pub w_o: ParamId,
    pub ffn: Mlp,
}

pub struct LrmtOutput {
    pub out: Var,
    /// Per-head `T x T` attention weights.
    pub weights: Vec<Var>,
}

impl LrmtBlock {
    pub fn new(store: &mut ParamStore, prefix: &str, config: LrmtConfig, rng: &mut impl Rng) -> Result<Self, AttnError> {
        config.validate()?;
        let (d, r) = (config.d, config.d_r);
        let q = Projection::new(store, &format!("{prefix}.attn.q"), &config, rng)?;
        let k = Projection::new(store, &format!("{prefix}.attn.k"), &config, rng)?;
        let v = Projection::new(store, &format!("{prefix}.attn.v"), &config, rng)?;
        let std = (d as f64).recip().sqrt();
        let mut heads = Vec::with_capacity(config.heads);
        for h in 0..config.heads {
            let p = format!("{prefix}.attn.head{h}");
            heads.push(Head {
                u: store.insert_normal(format!("{p}.u"), d, r, std, rng)?,
                a: store.insert(format!("{p}.a"), Tensor::identity(r))?,
                u_v: store.insert_normal(format!("{p}.u_v"), d, r, std, rng)?,
            });
        }
        let cat = r * config.heads;
        let w_o = store.insert_normal(format!("{prefix}.attn.out"), cat, d, (cat as f64).recip().sqrt(), rng)?;
        let ffn = Mlp::new(store, &format!("{prefix}.ffn"), d, config.ffn_hidden, d, Activation::Gelu, false, rng)?;
        Ok(Self { config, q, k, v, heads, w_o, ffn })
    }

    pub fn config(&self) -> &LrmtConfig {
        &self.config
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, x: Var) -> LrmtOutput {
        let n1 = tape.layer_norm_rows(x, LN_EPS);
        let q = tape.matmul(n1, self.q.var(tape, store));
        let k = tape.matmul(n1, self.k.var(tape, store));
        let v = tape.matmul(n1, self.v.var(tape, store));
        let inv_sqrt_r = (self.config.d_r as f64).sqrt().recip();
        let mut weights = Vec::with_capacity(self.heads.len());
        let mut cat: Option<Var> = None;
        for head in &self.heads {
            let u = tape.param(store, head.u);
            let qa = tape.matmul(tape.matmul(q, u), tape.param(store, head.a));
            let ku = tape.matmul(k, u);
            let scores = tape.scale(tape.matmul(qa, tape.transpose(ku)), inv_sqrt_r);
            let alpha = tape.softmax_rows(scores);
            let out = tape.matmul(alpha, tape.matmul(v, tape.param(store, head.u_v)));
            weights.push(alpha);
            cat = Some(match cat {
                None => out,
                Some(prev) => tape.concat_cols(prev, out),
            });
        }
        let attn = tape.matmul(cat.expect("at least one head"), tape.param(store, self.w_o));
        let x1 = tape.add(x, attn);
        let x2 = tape.add(x1, self.ffn.forward(tape, store, tape.layer_norm_rows(x1, LN_EPS)));
        LrmtOutput { out: tape.layer_norm_rows(x2, LN_EPS), weights }
    }

    /// Materialized parameters of one head, for use with
    /// [`low_rank_attention`](super::low_rank_attention) on `LN(X)`.
    pub fn head_params(&self, store: &ParamStore, head: usize) -> LowRankAttentionParams {
        let h = &self.heads[head];
        LowRankAttentionParams {
            w_q: self.q.materialize(store),
            w_k: self.k.materialize(store),
            w_v: self.v.materialize(store),
            u: store.get(h.u).clone(),
            a: store.get(h.a).clone(),
            u_v: store.get(h.u_v).clone(),
        }
    }
}

/// Runs the block on a plain `T x d` matrix.
pub fn lrmt_block(x: &Tensor, block: &LrmtBlock, store: &ParamStore) -> Result<Tensor, AttnError> {
    if x.shape().len() != 2 || x.cols() != block.config.d {
        return Err(AttnError::Shape(format!("input {:?} for model width {}", x.shape(), block.config.d)));
    }
    if x.rows() == 0 {
        return Err(AttnError::NoTokens);
    }
    let tape = Tape::new();
    let out = block.forward(&tape, store, tape.constant(x.clone())).out;
    Ok(tape.value(out))
}
