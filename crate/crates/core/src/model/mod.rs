//! A tiny pre-norm decoder-only transformer with a pluggable positional
//! scheme, trained with AdamW on the autodiff graph from [`crate::numerics`].

mod checkpoint;
mod optim;
mod train;


use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{Graph, Matrix, NodeId, NumericsError, RngSeed, IGNORE_TARGET};
use crate::posemb::{
    attention_bias_alibi, build_schedule, init_fourier_coefficients, rope_a_schedule, EmbeddingKind,
    PosEmbError, PositionEncoding,
};

pub use checkpoint::{decode_snapshot, encode_snapshot, load_snapshot, save_snapshot, ModelSnapshot, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use optim::{lr_at, AdamW};
pub use train::{data_seed, loss_csv, train, Batch, LossRecord, Scheduler, TrainConfig, Trainer};

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("token {token} is outside the vocabulary of {vocab}")]
    OutOfVocab { token: usize, vocab: usize },
    #[error("batch is empty or ragged")]
    BadBatch,
    #[error("loss became non-finite at step {step}")]
    Diverged { step: usize },
    #[error("evaluation set is empty")]
    EmptyEvaluation,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    PosEmb(#[from] PosEmbError),
}

/// Settings for the Fourier-series coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FopeConfig {
    pub sigma: f64,
    /// Total number of source frequencies `D`; `None` means `head_dim`.
    pub num_freqs: Option<usize>,
    pub seed: RngSeed,
}

impl Default for FopeConfig {
    fn default() -> Self {
        Self { sigma: 0.3, num_freqs: None, seed: RngSeed(1) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub num_heads: usize,
    pub num_layers: usize,
    pub mlp_ratio: usize,
    pub max_train_length: usize,
    pub embedding_kind: EmbeddingKind,
    pub base_theta: f64,
    pub fope: FopeConfig,
    pub qk_norm: bool,
    pub init_seed: RngSeed,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 64,
            d_model: 64,
            num_heads: 4,
            num_layers: 2,
            mlp_ratio: 4,
            max_train_length: 64,
            embedding_kind: EmbeddingKind::Rope,
            base_theta: 10000.0,
            fope: FopeConfig::default(),
            qk_norm: false,
            init_seed: RngSeed(0),
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.num_heads.max(1)
    }

    pub fn hidden(&self) -> usize {
        self.mlp_ratio * self.d_model
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.vocab_size == 0 || self.d_model == 0 || self.num_layers == 0 || self.mlp_ratio == 0 {
            return bad("sizes must be positive".into());
        }
        if self.num_heads == 0 || self.d_model % self.num_heads != 0 {
            return bad(format!("d_model {} not divisible by {} heads", self.d_model, self.num_heads));
        }
        if self.head_dim() % 2 != 0 {
            return bad(format!("head_dim {} must be even", self.head_dim()));
        }
        if self.max_train_length < 2 {
            return bad("max_train_length must be at least 2".into());
        }
        Ok(())
    }

    /// Number of trainable scalars, from the layout alone.
    pub fn parameter_count(&self) -> usize {
        let (v, d, h, l) = (self.vocab_size, self.d_model, self.hidden(), self.num_layers);
        let per_layer = 2 * d + 4 * d * d + 2 * d + d * h + h + h * d + d;
        v * d + l * per_layer + 2 * d + d * v
    }

    /// Positional scheme implied by the embedding kind.
    pub fn position_encoding(&self) -> Result<PositionEncoding, ModelError> {
        let (hd, theta, n) = (self.head_dim(), self.base_theta, self.max_train_length);
        Ok(match self.embedding_kind {
            EmbeddingKind::Nope => PositionEncoding::Nope,
            EmbeddingKind::Alibi => PositionEncoding::Alibi { num_heads: self.num_heads },
            EmbeddingKind::Rope => PositionEncoding::Rotary(build_schedule(hd, theta, n, false)?),
            EmbeddingKind::RopeA => PositionEncoding::Rotary(rope_a_schedule(hd, theta, n)?),
            EmbeddingKind::Fope { fs_enabled, cf_enabled } => {
                let schedule = build_schedule(hd, theta, n, cf_enabled)?;
                if fs_enabled {
                    let d = self.fope.num_freqs.unwrap_or(hd);
                    PositionEncoding::Fourier(init_fourier_coefficients(
                        &schedule,
                        self.num_heads,
                        d,
                        self.fope.sigma,
                        self.fope.seed,
                    )?)
                } else {
                    PositionEncoding::Rotary(schedule)
                }
            }
        })
    }
}

/// Name, shape and weight-decay flag of one parameter matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub decay: bool,
}

const PER_LAYER: usize = 12;
// offsets inside a layer block
const LN1_G: usize = 0;
const LN1_B: usize = 1;
const WQ: usize = 2;
const WK: usize = 3;
const WV: usize = 4;
const WO: usize = 5;
const LN2_G: usize = 6;
const LN2_B: usize = 7;
const W1: usize = 8;
const B1: usize = 9;
const W2: usize = 10;
const B2: usize = 11;

/// Parameter matrices in declaration order.
pub fn param_specs(c: &ModelConfig) -> Vec<ParamSpec> {
    let (v, d, h) = (c.vocab_size, c.d_model, c.hidden());
    let spec = |name: String, rows, cols, decay| ParamSpec { name, rows, cols, decay };
    let mut out = vec![spec("tok_emb".into(), v, d, true)];
    for l in 0..c.num_layers {
        out.extend([
            spec(format!("layer{l}.ln1.gain"), 1, d, false),
            spec(format!("layer{l}.ln1.bias"), 1, d, false),
            spec(format!("layer{l}.attn.wq"), d, d, true),
            spec(format!("layer{l}.attn.wk"), d, d, true),
            spec(format!("layer{l}.attn.wv"), d, d, true),
            spec(format!("layer{l}.attn.wo"), d, d, true),
            spec(format!("layer{l}.ln2.gain"), 1, d, false),
            spec(format!("layer{l}.ln2.bias"), 1, d, false),
            spec(format!("layer{l}.mlp.w1"), d, h, true),
            spec(format!("layer{l}.mlp.b1"), 1, h, false),
            spec(format!("layer{l}.mlp.w2"), h, d, true),
            spec(format!("layer{l}.mlp.b2"), 1, d, false),
        ]);
    }
    out.extend([
        spec("final_ln.gain".into(), 1, d, false),
        spec("final_ln.bias".into(), 1, d, false),
        spec("unembed".into(), d, v, true),
    ]);
    out
}

/// Mean absolute pre-rotation query/key activations, accumulated per layer
/// and head dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct QkStats {
    pub sum_abs_q: Vec<Vec<f64>>,
    pub sum_abs_k: Vec<Vec<f64>>,
    pub count: usize,
}

impl QkStats {
    pub fn new(num_layers: usize, head_dim: usize) -> Self {
        Self {
            sum_abs_q: vec![vec![0.0; head_dim]; num_layers],
            sum_abs_k: vec![vec![0.0; head_dim]; num_layers],
            count: 0,
        }
    }

    fn add(&mut self, layer: usize, q: &Matrix, k: &Matrix) {
        for r in 0..q.rows() {
            for (s, v) in self.sum_abs_q[layer].iter_mut().zip(q.row(r)) {
                *s += v.abs();
            }
            for (s, v) in self.sum_abs_k[layer].iter_mut().zip(k.row(r)) {
                *s += v.abs();
            }
        }
    }
}

/// Parameters plus the fixed positional machinery.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    specs: Vec<ParamSpec>,
    params: Vec<Matrix>,
    encoding: PositionEncoding,
}

impl Model {
    /// Fresh model with scaled-normal initialisation.
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let specs = param_specs(&config);
        let mut rng = config.init_seed.rng();
        let resid_scale = 1.0 / (2.0 * config.num_layers as f64).sqrt();
        let params = specs
            .iter()
            .map(|s| {
                if s.name.ends_with("gain") {
                    Matrix::filled(s.rows, s.cols, 1.0)
                } else if s.rows == 1 {
                    Matrix::zeros(s.rows, s.cols)
                } else {
                    let std = if s.name.ends_with("wo") || s.name.ends_with("w2") {
                        INIT_STD * resid_scale
                    } else {
                        INIT_STD
                    };
                    Matrix::randn(s.rows, s.cols, std, &mut rng)
                }
            })
            .collect();
        let encoding = config.position_encoding()?;
        Ok(Self { config, specs, params, encoding })
    }

    /// Rebuilds a model from stored parameters.
    pub fn from_params(config: ModelConfig, params: Vec<Matrix>) -> Result<Self, ModelError> {
        config.validate()?;
        let specs = param_specs(&config);
        if specs.len() != params.len()
            || specs.iter().zip(&params).any(|(s, p)| p.shape() != (s.rows, s.cols))
        {
            return Err(ModelError::Checkpoint("parameter shapes do not match the config".into()));
        }
        let encoding = config.position_encoding()?;
        Ok(Self { config, specs, params, encoding })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Matrix] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Matrix] {
        &mut self.params
    }

    pub fn encoding(&self) -> &PositionEncoding {
        &self.encoding
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Matrix::len).sum()
    }

    /// Checksum of the frozen Fourier coefficients, if any.
    pub fn coefficient_checksum(&self) -> Option<u64> {
        self.encoding.coefficients().map(|c| c.checksum())
    }

    /// Adds the parameters to `g` as trainable leaves (or constants).
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<NodeId> {
        self.params
            .iter()
            .map(|p| if trainable { g.param(p.clone()) } else { g.input(p.clone()) })
            .collect()
    }

    fn check_tokens(&self, inputs: &[Vec<usize>]) -> Result<usize, ModelError> {
        let t = inputs.first().map(Vec::len).ok_or(ModelError::BadBatch)?;
        if t == 0 || inputs.iter().any(|s| s.len() != t) {
            return Err(ModelError::BadBatch);
        }
        let vocab = self.config.vocab_size;
        if let Some(&token) = inputs.iter().flatten().find(|&&id| id >= vocab) {
            return Err(ModelError::OutOfVocab { token, vocab });
        }
        Ok(t)
    }

    /// Records the forward pass and returns the `(batch * len) x vocab` logits.
    /// Positions run from `offset` to `offset + len - 1`.
    pub fn forward_graph(
        &self,
        g: &mut Graph,
        p: &[NodeId],
        inputs: &[Vec<usize>],
        offset: usize,
        mut stats: Option<&mut QkStats>,
    ) -> Result<NodeId, ModelError> {
        let t = self.check_tokens(inputs)?;
        let c = &self.config;
        let (nh, hd) = (c.num_heads, c.head_dim());
        let batch = inputs.len();
        let ids: Vec<usize> = inputs.iter().flatten().copied().collect();
        let positions: Vec<usize> = (offset..offset + t).collect();

        let tables: Vec<Option<(Rc<Matrix>, Rc<Matrix>)>> = (0..nh)
            .map(|h| self.encoding.tables(h, &positions).map(|tb| (Rc::new(tb.cos), Rc::new(tb.sin))))
            .collect();
        let masks: Vec<Rc<Matrix>> = match self.encoding {
            PositionEncoding::Alibi { num_heads } => {
                attention_bias_alibi(num_heads, t).into_iter().map(Rc::new).collect()
            }
            _ => {
                let mut m = Matrix::zeros(t, t);
                for i in 0..t {
                    for j in i + 1..t {
                        m.set(i, j, f64::NEG_INFINITY);
                    }
                }
                vec![Rc::new(m); nh]
            }
        };
        let score_scale = 1.0 / (hd as f64).sqrt();

        let mut x = g.gather_rows(p[0], &ids)?;
        for l in 0..c.num_layers {
            let lp = |k: usize| p[1 + l * PER_LAYER + k];
            let h = g.layer_norm(x, Some(lp(LN1_G)), Some(lp(LN1_B)), LAYER_NORM_EPS)?;
            let q = g.matmul(h, lp(WQ))?;
            let k = g.matmul(h, lp(WK))?;
            let v = g.matmul(h, lp(WV))?;
            let mut rows = Vec::with_capacity(batch);
            for b in 0..batch {
                let mut heads = Vec::with_capacity(nh);
                for head in 0..nh {
                    let mut qb = g.block(q, b * t, head * hd, t, hd)?;
                    let mut kb = g.block(k, b * t, head * hd, t, hd)?;
                    let vb = g.block(v, b * t, head * hd, t, hd)?;
                    if c.qk_norm {
                        qb = g.layer_norm(qb, None, None, LAYER_NORM_EPS)?;
                        kb = g.layer_norm(kb, None, None, LAYER_NORM_EPS)?;
                    }
                    if let Some(s) = stats.as_deref_mut() {
                        s.add(l, g.value(qb), g.value(kb));
                    }
                    if let Some((cos, sin)) = &tables[head] {
                        qb = g.rotary(qb, cos.clone(), sin.clone())?;
                        kb = g.rotary(kb, cos.clone(), sin.clone())?;
                    }
                    let s = g.matmul_nt(qb, kb)?;
                    let s = g.scale(s, score_scale)?;
                    let s = g.add_const(s, masks[head].clone())?;
                    let a = g.softmax_rows(s)?;
                    heads.push(g.matmul(a, vb)?);
                }
                rows.push(if nh == 1 { heads[0] } else { g.concat_cols(&heads)? });
            }
            let attn_in = if batch == 1 { rows[0] } else { g.concat_rows(&rows)? };
            let attn = g.matmul(attn_in, lp(WO))?;
            x = g.add(x, attn)?;

            let h = g.layer_norm(x, Some(lp(LN2_G)), Some(lp(LN2_B)), LAYER_NORM_EPS)?;
            let up = g.matmul(h, lp(W1))?;
            let up = g.add_row(up, lp(B1))?;
            let act = g.silu(up)?;
            let down = g.matmul(act, lp(W2))?;
            let down = g.add_row(down, lp(B2))?;
            x = g.add(x, down)?;
        }
        if let Some(s) = stats {
            s.count += batch * t * nh;
        }
        let base = 1 + c.num_layers * PER_LAYER;
        let xf = g.layer_norm(x, Some(p[base]), Some(p[base + 1]), LAYER_NORM_EPS)?;
        Ok(g.matmul(xf, p[base + 2])?)
    }

    /// Logits without gradient bookkeeping.
    pub fn logits(&self, inputs: &[Vec<usize>], offset: usize) -> Result<Matrix, ModelError> {
        let mut g = Graph::new();
        let p = self.bind(&mut g, false);
        let out = self.forward_graph(&mut g, &p, inputs, offset, None)?;
        Ok(g.value(out).clone())
    }

    /// Mean next-token cross-entropy of a batch (no gradients).
    pub fn loss(&self, batch: &Batch) -> Result<f64, ModelError> {
        let mut g = Graph::new();
        let p = self.bind(&mut g, false);
        let logits = self.forward_graph(&mut g, &p, &batch.inputs, 0, None)?;
        let loss = g.cross_entropy(logits, &batch.flat_targets())?;
        Ok(g.value(loss).get(0, 0))
    }

    /// Total cross-entropy and number of scored targets.
    fn loss_sum(&self, batch: &Batch) -> Result<(f64, usize), ModelError> {
        let n = batch.flat_targets().iter().filter(|&&t| t != IGNORE_TARGET).count();
        Ok((self.loss(batch)? * n as f64, n))
    }

    /// Records the pre-rotation q/k statistics over `inputs`.
    pub fn qk_stats(&self, inputs: &[Vec<usize>]) -> Result<QkStats, ModelError> {
        let mut stats = QkStats::new(self.config.num_layers, self.config.head_dim());
        let mut g = Graph::new();
        let p = self.bind(&mut g, false);
        self.forward_graph(&mut g, &p, inputs, 0, Some(&mut stats))?;
        Ok(stats)
    }

    /// `exp(mean next-token cross-entropy)` per evaluation length. Each
    /// sequence contributes its first `len + 1` tokens; shorter sequences are
    /// skipped for that length.
    pub fn perplexity(
        &self,
        sequences: &[Vec<usize>],
        eval_lengths: &[usize],
    ) -> Result<Vec<(usize, f64)>, ModelError> {
        if sequences.is_empty() || eval_lengths.is_empty() {
            return Err(ModelError::EmptyEvaluation);
        }
        if eval_lengths.windows(2).any(|w| w[0] > w[1]) {
            return Err(ModelError::Config("eval lengths must be sorted".into()));
        }
        let mut out = Vec::with_capacity(eval_lengths.len());
        for &len in eval_lengths {
            let usable: Vec<&Vec<usize>> = sequences.iter().filter(|s| s.len() > len).collect();
            if usable.is_empty() || len == 0 {
                return Err(ModelError::EmptyEvaluation);
            }
            let (mut total, mut count) = (0.0, 0usize);
            for chunk in usable.chunks(8) {
                let batch = Batch {
                    inputs: chunk.iter().map(|s| s[..len].to_vec()).collect(),
                    targets: chunk.iter().map(|s| s[1..=len].to_vec()).collect(),
                };
                let (s, n) = self.loss_sum(&batch)?;
                total += s;
                count += n;
            }
            out.push((len, (total / count as f64).exp()));
        }
        Ok(out)
    }
}
