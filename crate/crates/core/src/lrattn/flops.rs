use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionVariant {
    Dense,
    LowRank,
}

/// Multiply-add count of the score and weighting stage of one attention head
/// over `t` tokens of width `d`. Q, K, V projections are shared by both
/// variants and excluded.
///
/// Dense: `QKᵀ` (t·t·d) plus `αV` (t·t·d).
/// Low-rank, in evaluation order: `QU`, `KU`, `V·U_V` (3·t·d·d_r), `(QU)A`
/// (t·d_r²), scores (t·t·d_r), then `α(V·U_V)` (t·t·d_r).
pub fn attention_flop_count(t: u64, d: u64, d_r: u64, variant: AttentionVariant) -> u64 {
    match variant {
        AttentionVariant::Dense => 2 * t * t * d,
        AttentionVariant::LowRank => 3 * t * d * d_r + t * d_r * d_r + 2 * t * t * d_r,
    }
}
