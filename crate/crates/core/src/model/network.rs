use serde::{Deserialize, Serialize};

use super::{Availability, ModelConfig, ModelError, PatientRecord};
use crate::data::Modality;
use crate::diffcore::{Gradients, ParamId, ParamStore, Tape, Tensor, Var};
use crate::flowcore::{
    align_loss_tape, cdt_loss_tape, fuse_latents_tape, init_class_prior, recover_missing_tape, Activation, ClassPrior,
    Decoder, FlowModel, FlowSpec, Fusion, Mlp,
};
use crate::lrattn::{LrmtBlock, LrmtConfig};
use crate::rng::substream;
use crate::survcore::{survival_loss_tape, HazardVector};

use super::config::FusionMode;

/// How a missing modality's token is filled in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    /// Fuse observed latents, invert the missing modality's flow, decode.
    #[default]
    Flow,
    /// Zero vector (ablation baseline).
    Zero,
}

/// Per-record loss components. Auxiliary terms are zero unless both
/// modalities were used.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub surv: f64,
    pub recon: f64,
    pub align: f64,
    pub cdt: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn weighted_total(&self, config: &ModelConfig) -> f64 {
        self.surv + config.lambda_recon * self.recon + config.lambda_align * self.align + config.lambda_cdt * self.cdt
    }

    pub(crate) fn add(&mut self, o: &LossBreakdown) {
        self.surv += o.surv;
        self.recon += o.recon;
        self.align += o.align;
        self.cdt += o.cdt;
        self.total += o.total;
    }

    pub(crate) fn scale(&mut self, f: f64) {
        self.surv *= f;
        self.recon *= f;
        self.align *= f;
        self.cdt *= f;
        self.total *= f;
    }

    /// Name of the first non-finite component, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [("L_surv", self.surv), ("L_recon", self.recon), ("L_align", self.align), ("L_cdt", self.cdt), ("total", self.total)]
            .into_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(n, _)| n)
    }
}

/// Instance map followed by gated attention pooling over the bag.
#[derive(Clone, Debug)]
pub struct WsiEncoder {
    pub instance: Mlp,
    pub gate_v: ParamId,
    pub gate_u: ParamId,
    pub gate_w: ParamId,
}

impl WsiEncoder {
    /// Returns the `[1, d]` embedding and the `[1, N]` pooling weights.
    pub fn forward(&self, tape: &Tape, store: &ParamStore, bag: Var) -> (Var, Var) {
        let h = self.instance.forward(tape, store, bag);
        let v = tape.tanh(tape.matmul(h, tape.param(store, self.gate_v)));
        let u = tape.sigmoid(tape.matmul(h, tape.param(store, self.gate_u)));
        let scores = tape.matmul(tape.mul(v, u), tape.param(store, self.gate_w));
        let weights = tape.softmax_rows(tape.transpose(scores));
        (tape.matmul(weights, h), weights)
    }
}

/// Parameter layout of the full model. Values live in a separate
/// [`ParamStore`] so the same layout can be evaluated on perturbed copies.
#[derive(Clone, Debug)]
pub struct Network {
    pub config: ModelConfig,
    pub d_w: usize,
    pub d_g: usize,
    pub wsi_encoder: WsiEncoder,
    pub gene_encoder: Mlp,
    pub flow_wsi: FlowModel,
    pub flow_gene: FlowModel,
    pub prior: ClassPrior,
    pub decoder_wsi: Decoder,
    pub decoder_gene: Decoder,
    pub fusion: Fusion,
    pub lrmt: LrmtBlock,
    pub head_w: ParamId,
    pub head_b: ParamId,
}

/// Tape handles produced by one forward pass.
pub struct ForwardPass {
    /// `[1, K]` event probabilities.
    pub hazard: Var,
    /// `[2, d]` token matrix fed to the transformer (WSI row, gene row).
    pub tokens: Var,
    pub surv: Var,
    pub recon: Option<Var>,
    pub align: Option<Var>,
    pub cdt: Option<Var>,
    pub total: Var,
    /// Modality whose token was imputed, if any.
    pub imputed: Option<Modality>,
    pub attention: Vec<Var>,
    pub pool_weights: Option<Var>,
}

impl ForwardPass {
    pub fn breakdown(&self, tape: &Tape) -> LossBreakdown {
        let get = |v: Option<Var>| v.map_or(0.0, |v| tape.scalar(v));
        LossBreakdown {
            surv: tape.scalar(self.surv),
            recon: get(self.recon),
            align: get(self.align),
            cdt: get(self.cdt),
            total: tape.scalar(self.total),
        }
    }
}

impl Network {
    pub fn new(config: &ModelConfig, d_w: usize, d_g: usize, store: &mut ParamStore) -> Result<Self, ModelError> {
        config.validate()?;
        if d_w == 0 || d_g == 0 {
            return Err(ModelError::Config(format!("input widths must be positive, got d_w={d_w}, d_g={d_g}")));
        }
        let rng = &mut substream(config.seed, "init");
        let d = config.d;
        let instance =
            Mlp::new(store, "encoder.wsi.instance", d_w, config.encoder_hidden, d, Activation::Gelu, false, rng)?;
        let p = config.pool_hidden;
        let std = (d as f64).recip().sqrt();
        let wsi_encoder = WsiEncoder {
            instance,
            gate_v: store.insert_normal("encoder.wsi.pool.v", d, p, std, rng)?,
            gate_u: store.insert_normal("encoder.wsi.pool.u", d, p, std, rng)?,
            gate_w: store.insert_normal("encoder.wsi.pool.w", p, 1, (p as f64).recip().sqrt(), rng)?,
        };
        let gene_encoder = Mlp::new(store, "encoder.gene", d_g, config.encoder_hidden, d, Activation::Gelu, false, rng)?;
        let spec = FlowSpec { dim: d, layers: config.flow_layers, hidden: config.flow_hidden, cond_dim: 0 };
        let flow_wsi = FlowModel::new(store, "wsi", spec, rng)?;
        let flow_gene = FlowModel::new(store, "gene", spec, rng)?;
        let prior = init_class_prior(store, config.classes, d)?;
        let decoder_wsi = Decoder::new(store, "wsi", d, config.decoder_hidden, rng)?;
        let decoder_gene = Decoder::new(store, "gene", d, config.decoder_hidden, rng)?;
        let fusion = match config.fusion {
            FusionMode::Mean => Fusion::Mean,
            FusionMode::Learned => Fusion::Learned { logits: store.insert_zeros("fusion.logits", 1, 2)? },
        };
        let lrmt_cfg =
            LrmtConfig { d, d_r: config.d_r, heads: config.heads, tucker: config.tucker, ffn_hidden: config.ffn_hidden };
        let lrmt = LrmtBlock::new(store, "lrmt", lrmt_cfg, rng)?;
        let head_w = store.insert_normal("head.w", d, config.bins, std, rng)?;
        let head_b = store.insert_zeros("head.b", 1, config.bins)?;
        Ok(Self {
            config: config.clone(),
            d_w,
            d_g,
            wsi_encoder,
            gene_encoder,
            flow_wsi,
            flow_gene,
            prior,
            decoder_wsi,
            decoder_gene,
            fusion,
            lrmt,
            head_w,
            head_b,
        })
    }

    fn flow(&self, m: Modality) -> &FlowModel {
        match m {
            Modality::Wsi => &self.flow_wsi,
            Modality::Gene => &self.flow_gene,
        }
    }

    fn decoder(&self, m: Modality) -> &Decoder {
        match m {
            Modality::Wsi => &self.decoder_wsi,
            Modality::Gene => &self.decoder_gene,
        }
    }

    /// Recovers modality `missing` from the other modality's embedding.
    fn recover(&self, tape: &Tape, store: &ParamStore, missing: Modality, observed_embedding: Var) -> Var {
        let observed = other(missing);
        let z = self.flow(observed).forward(tape, store, observed_embedding, None).z;
        let fused = fuse_latents_tape(tape, store, &[(slot(observed), z)], &self.fusion);
        recover_missing_tape(tape, store, fused, self.flow(missing), self.decoder(missing)).1
    }

    fn head(&self, tape: &Tape, store: &ParamStore, tokens: Var) -> (Var, Var, Vec<Var>) {
        let out = self.lrmt.forward(tape, store, tokens);
        let pooled = tape.mean_rows(out.out);
        let logits = tape.add_row(tape.matmul(pooled, tape.param(store, self.head_w)), tape.param(store, self.head_b));
        (tape.softmax_rows(logits), out.out, out.weights)
    }

    pub fn encode_wsi_tape(&self, tape: &Tape, store: &ParamStore, bag: &Tensor) -> Result<(Var, Var), ModelError> {
        if bag.shape().len() != 2 || bag.rows() == 0 {
            return Err(ModelError::Contract("WSI bag must be a non-empty matrix".into()));
        }
        check_dim("WSI instance width", self.d_w, bag.cols())?;
        Ok(self.wsi_encoder.forward(tape, store, tape.constant(bag.clone())))
    }

    pub fn encode_gene_tape(&self, tape: &Tape, store: &ParamStore, gene: &[f64]) -> Result<Var, ModelError> {
        check_dim("gene profile length", self.d_g, gene.len())?;
        Ok(self.gene_encoder.forward(tape, store, tape.constant(Tensor::row(gene.to_vec()))))
    }

    /// Full forward pass for one record under availability `avail` (already
    /// intersected with the record's own flags). Auxiliary losses are only
    /// built when `aux` is set and both modalities are used.
    pub fn forward(
        &self,
        tape: &Tape,
        store: &ParamStore,
        record: &PatientRecord,
        avail: Availability,
        imputation: Imputation,
        aux: bool,
    ) -> Result<ForwardPass, ModelError> {
        let cfg = &self.config;
        if !avail.wsi && !avail.gene {
            return Err(ModelError::Contract(format!("record {}: both modalities missing", record.id)));
        }
        record.validate(cfg.bins, cfg.classes)?;

        let mut pool_weights = None;
        let e_w = if avail.wsi {
            let bag = record.wsi().ok_or_else(|| unavailable(record, "WSI"))?;
            let (e, w) = self.encode_wsi_tape(tape, store, bag)?;
            pool_weights = Some(w);
            Some(e)
        } else {
            None
        };
        let e_g = if avail.gene {
            let gene = record.gene().ok_or_else(|| unavailable(record, "gene"))?;
            Some(self.encode_gene_tape(tape, store, gene)?)
        } else {
            None
        };

        let fill = |missing: Modality, observed: Var| match imputation {
            Imputation::Flow => self.recover(tape, store, missing, observed),
            Imputation::Zero => tape.constant(Tensor::zeros(&[1, cfg.d])),
        };
        let (t_w, t_g, imputed) = match (e_w, e_g) {
            (Some(w), Some(g)) => (w, g, None),
            (Some(w), None) => (w, fill(Modality::Gene, w), Some(Modality::Gene)),
            (None, Some(g)) => (fill(Modality::Wsi, g), g, Some(Modality::Wsi)),
            (None, None) => unreachable!(),
        };
        let tokens = tape.concat_rows(&[t_w, t_g]);
        let (hazard, hidden, attention) = self.head(tape, store, tokens);
        let surv = survival_loss_tape(tape, hazard, &record.label, cfg.loss_convention);

        let (mut recon, mut align, mut cdt) = (None, None, None);
        if let (true, Some(w), Some(g)) = (aux, e_w, e_g) {
            let class = record.class_id;
            let (w_det, g_det) = (tape.detach(w), tape.detach(g));
            cdt = Some(tape.add(
                cdt_loss_tape(tape, store, w_det, class, &self.flow_wsi, &self.prior),
                cdt_loss_tape(tape, store, g_det, class, &self.flow_gene, &self.prior),
            ));
            let g_hat = self.recover(tape, store, Modality::Gene, w);
            let w_hat = self.recover(tape, store, Modality::Wsi, g);
            recon = Some(tape.add(tape.sum_sq(tape.sub(w_hat, w_det)), tape.sum_sq(tape.sub(g_hat, g_det))));
            let h_real = tape.detach(hidden);
            let h_gen_g = self.lrmt.forward(tape, store, tape.concat_rows(&[w, g_hat])).out;
            let h_gen_w = self.lrmt.forward(tape, store, tape.concat_rows(&[w_hat, g])).out;
            align = Some(tape.add(align_loss_tape(tape, h_real, h_gen_w), align_loss_tape(tape, h_real, h_gen_g)));
        }

        let mut terms = vec![surv];
        for (v, lambda) in [(recon, cfg.lambda_recon), (align, cfg.lambda_align), (cdt, cfg.lambda_cdt)] {
            if let Some(v) = v {
                if lambda > 0.0 {
                    terms.push(tape.scale(v, lambda));
                }
            }
        }
        let total = tape.add_all(&terms);
        Ok(ForwardPass { hazard, tokens, surv, recon, align, cdt, total, imputed, attention, pool_weights })
    }

    /// Gradient of the record's total loss and its components.
    pub fn record_gradients(
        &self,
        store: &ParamStore,
        record: &PatientRecord,
        avail: Availability,
    ) -> Result<(Gradients, LossBreakdown), ModelError> {
        let tape = Tape::new();
        let pass = self.forward(&tape, store, record, avail, Imputation::Flow, true)?;
        let losses = pass.breakdown(&tape);
        if let Some(term) = losses.non_finite_term() {
            return Err(ModelError::Numerical { epoch: 0, term: term.to_string(), detail: format!("record {}", record.id) });
        }
        let grads = tape.backward(pass.total, store)?;
        Ok((grads, losses))
    }
}

pub(crate) fn other(m: Modality) -> Modality {
    match m {
        Modality::Wsi => Modality::Gene,
        Modality::Gene => Modality::Wsi,
    }
}

fn slot(m: Modality) -> usize {
    match m {
        Modality::Wsi => 0,
        Modality::Gene => 1,
    }
}

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected != got {
        return Err(ModelError::DimMismatch { what, expected, got });
    }
    Ok(())
}

fn unavailable(record: &PatientRecord, what: &str) -> ModelError {
    ModelError::Contract(format!("record {}: {what} requested but not available", record.id))
}

/// A network together with its parameter values.
#[derive(Clone, Debug)]
pub struct Model {
    pub net: Network,
    pub store: ParamStore,
}

impl Model {
    /// Fresh parameters drawn from the `init` substream of `config.seed`.
    pub fn new(config: &ModelConfig, d_w: usize, d_g: usize) -> Result<Self, ModelError> {
        let mut store = ParamStore::new();
        let net = Network::new(config, d_w, d_g, &mut store)?;
        Ok(Self { net, store })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.net.config
    }

    /// Forward pass with the record's own availability and all loss terms.
    pub fn forward(&self, record: &PatientRecord) -> Result<(HazardVector, LossBreakdown), ModelError> {
        let tape = Tape::new();
        let pass = self.net.forward(&tape, &self.store, record, record.availability(), Imputation::Flow, true)?;
        let hazard = HazardVector::new(tape.value(pass.hazard).into_values())?;
        Ok((hazard, pass.breakdown(&tape)))
    }

    /// Hazard under availability `avail` without auxiliary losses.
    pub fn predict(
        &self,
        record: &PatientRecord,
        avail: Availability,
        imputation: Imputation,
    ) -> Result<HazardVector, ModelError> {
        let tape = Tape::new();
        let pass = self.net.forward(&tape, &self.store, record, avail, imputation, false)?;
        Ok(HazardVector::new(tape.value(pass.hazard).into_values())?)
    }

    /// Embedding of `missing` recovered from the other modality, paired with
    /// the encoder's embedding of the real data. Needs a complete record.
    pub fn recovery_pair(&self, record: &PatientRecord, missing: Modality) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        let tape = Tape::new();
        let bag = record.wsi().ok_or_else(|| unavailable(record, "WSI"))?;
        let gene = record.gene().ok_or_else(|| unavailable(record, "gene"))?;
        let (e_w, _) = self.net.encode_wsi_tape(&tape, &self.store, bag)?;
        let e_g = self.net.encode_gene_tape(&tape, &self.store, gene)?;
        let (truth, observed) = match missing {
            Modality::Wsi => (e_w, e_g),
            Modality::Gene => (e_g, e_w),
        };
        let recovered = self.net.recover(&tape, &self.store, missing, observed);
        Ok((tape.value(recovered).into_values(), tape.value(truth).into_values()))
    }

    /// WSI embedding and pooling weights for a bag.
    pub fn encode_wsi(&self, bag: &Tensor) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        let tape = Tape::new();
        let (e, w) = self.net.encode_wsi_tape(&tape, &self.store, bag)?;
        Ok((tape.value(e).into_values(), tape.value(w).into_values()))
    }

    pub fn encode_gene(&self, gene: &[f64]) -> Result<Vec<f64>, ModelError> {
        let tape = Tape::new();
        let e = self.net.encode_gene_tape(&tape, &self.store, gene)?;
        Ok(tape.value(e).into_values())
    }
}
