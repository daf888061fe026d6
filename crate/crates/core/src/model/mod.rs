//! A miniature encoder–decoder translation model in pure f64.
//!
//! The network is a pre-norm transformer: token, position, and language
//! embeddings are summed at the input, each stack closes with a final
//! layer norm, and a single output projection serves both the decoder's
//! next-token logits and the masked-LM head used for pretraining. All
//! parameters live in named flat `Vec<f64>` groups so optimization,
//! checkpointing, and gradient verification can walk them uniformly.
//!
//! Sizing is desk scale by default — a couple of layers and heads, tiny
//! embeddings — so that end-to-end experiments finish in minutes on one
//! CPU core. The configurations used by full-size systems are retained
//! as documented presets.

mod checkpoint;
mod net;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LangId;
use crate::error::{Error, Result};
use crate::vocab::{BOS_ID, EOS_ID, MASK_ID, NUM_RESERVED, PAD_ID};

// ------------------------------------------------------------------- config

/// Architecture and optimization hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub max_len: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// Desk-scale defaults: small enough that a full training run takes
    /// minutes on a single CPU core.
    pub fn desk(vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            max_len: 32,
            embed_dim: 64,
            hidden_dim: 128,
            num_layers: 2,
            num_heads: 2,
            learning_rate: 0.05,
            seed: 0,
        }
    }

    /// Documented real-scale preset for multilingual systems (6 layers,
    /// 8 heads). Provided for reference; not exercised by the test suite.
    pub fn real_scale_multilingual(vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            max_len: 256,
            embed_dim: 512,
            hidden_dim: 2048,
            num_layers: 6,
            num_heads: 8,
            learning_rate: 1e-4,
            seed: 0,
        }
    }

    /// Documented real-scale preset for bilingual supervised baselines
    /// (5 layers, 2 heads — deliberately smaller to avoid overfitting
    /// small parallel corpora).
    pub fn real_scale_bilingual(vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            max_len: 256,
            embed_dim: 512,
            hidden_dim: 2048,
            num_layers: 5,
            num_heads: 2,
            learning_rate: 1e-4,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("vocab_size", self.vocab_size),
            ("max_len", self.max_len),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(Error::Model(format!("{name} must be at least 1, got {v}")));
            }
        }
        if self.embed_dim % self.num_heads != 0 {
            return Err(Error::Model(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        if self.vocab_size <= NUM_RESERVED {
            return Err(Error::Model(format!(
                "vocab_size {} leaves no room for real symbols after the {} reserved ids",
                self.vocab_size, NUM_RESERVED
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Model(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    /// Total number of trainable scalars for this configuration.
    pub fn param_count(&self, num_langs: usize) -> usize {
        let (v, m, d, f, l) = (
            self.vocab_size,
            self.max_len,
            self.embed_dim,
            self.hidden_dim,
            self.num_layers,
        );
        let enc_layer = 4 * d * d + 2 * d * f + f + 5 * d;
        let dec_layer = 8 * d * d + 2 * d * f + f + 7 * d;
        (v + m + num_langs) * d + l * (enc_layer + dec_layer) + 4 * d + d * v + v
    }
}

// --------------------------------------------------------------- parameters

#[derive(Debug, Clone, PartialEq)]
pub struct AttnParams {
    pub wq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
    pub wo: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LnParams {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncLayerParams {
    pub ln1: LnParams,
    pub attn: AttnParams,
    pub ln2: LnParams,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecLayerParams {
    pub ln1: LnParams,
    pub self_attn: AttnParams,
    pub ln2: LnParams,
    pub cross_attn: AttnParams,
    pub ln3: LnParams,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Every trainable array of the network, stored as named flat vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub tok: Vec<f64>,
    pub pos: Vec<f64>,
    pub lang: Vec<f64>,
    pub enc: Vec<EncLayerParams>,
    pub dec: Vec<DecLayerParams>,
    pub enc_ln: LnParams,
    pub dec_ln: LnParams,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

/// Gradients share the parameter layout exactly.
pub type Gradients = ParamSet;

fn ln_zeros(d: usize) -> LnParams {
    LnParams {
        gain: vec![0.0; d],
        bias: vec![0.0; d],
    }
}

fn attn_zeros(d: usize) -> AttnParams {
    AttnParams {
        wq: vec![0.0; d * d],
        wk: vec![0.0; d * d],
        wv: vec![0.0; d * d],
        wo: vec![0.0; d * d],
    }
}

impl ParamSet {
    /// All-zero parameter set with the right shapes.
    pub fn zeros(cfg: &ModelConfig, num_langs: usize) -> ParamSet {
        let (v, m, d, f) = (cfg.vocab_size, cfg.max_len, cfg.embed_dim, cfg.hidden_dim);
        ParamSet {
            tok: vec![0.0; v * d],
            pos: vec![0.0; m * d],
            lang: vec![0.0; num_langs * d],
            enc: (0..cfg.num_layers)
                .map(|_| EncLayerParams {
                    ln1: ln_zeros(d),
                    attn: attn_zeros(d),
                    ln2: ln_zeros(d),
                    w1: vec![0.0; d * f],
                    b1: vec![0.0; f],
                    w2: vec![0.0; f * d],
                    b2: vec![0.0; d],
                })
                .collect(),
            dec: (0..cfg.num_layers)
                .map(|_| DecLayerParams {
                    ln1: ln_zeros(d),
                    self_attn: attn_zeros(d),
                    ln2: ln_zeros(d),
                    cross_attn: attn_zeros(d),
                    ln3: ln_zeros(d),
                    w1: vec![0.0; d * f],
                    b1: vec![0.0; f],
                    w2: vec![0.0; f * d],
                    b2: vec![0.0; d],
                })
                .collect(),
            enc_ln: ln_zeros(d),
            dec_ln: ln_zeros(d),
            out_w: vec![0.0; d * v],
            out_b: vec![0.0; v],
        }
    }

    /// Named parameter groups in canonical order.
    pub fn groups(&self) -> Vec<(String, &Vec<f64>)> {
        let mut out: Vec<(String, &Vec<f64>)> = vec![
            ("tok_embed".into(), &self.tok),
            ("pos_embed".into(), &self.pos),
            ("lang_embed".into(), &self.lang),
        ];
        for (i, l) in self.enc.iter().enumerate() {
            out.push((format!("enc.{i}.ln1.gain"), &l.ln1.gain));
            out.push((format!("enc.{i}.ln1.bias"), &l.ln1.bias));
            out.push((format!("enc.{i}.attn.wq"), &l.attn.wq));
            out.push((format!("enc.{i}.attn.wk"), &l.attn.wk));
            out.push((format!("enc.{i}.attn.wv"), &l.attn.wv));
            out.push((format!("enc.{i}.attn.wo"), &l.attn.wo));
            out.push((format!("enc.{i}.ln2.gain"), &l.ln2.gain));
            out.push((format!("enc.{i}.ln2.bias"), &l.ln2.bias));
            out.push((format!("enc.{i}.ffn.w1"), &l.w1));
            out.push((format!("enc.{i}.ffn.b1"), &l.b1));
            out.push((format!("enc.{i}.ffn.w2"), &l.w2));
            out.push((format!("enc.{i}.ffn.b2"), &l.b2));
        }
        for (i, l) in self.dec.iter().enumerate() {
            out.push((format!("dec.{i}.ln1.gain"), &l.ln1.gain));
            out.push((format!("dec.{i}.ln1.bias"), &l.ln1.bias));
            out.push((format!("dec.{i}.self_attn.wq"), &l.self_attn.wq));
            out.push((format!("dec.{i}.self_attn.wk"), &l.self_attn.wk));
            out.push((format!("dec.{i}.self_attn.wv"), &l.self_attn.wv));
            out.push((format!("dec.{i}.self_attn.wo"), &l.self_attn.wo));
            out.push((format!("dec.{i}.ln2.gain"), &l.ln2.gain));
            out.push((format!("dec.{i}.ln2.bias"), &l.ln2.bias));
            out.push((format!("dec.{i}.cross_attn.wq"), &l.cross_attn.wq));
            out.push((format!("dec.{i}.cross_attn.wk"), &l.cross_attn.wk));
            out.push((format!("dec.{i}.cross_attn.wv"), &l.cross_attn.wv));
            out.push((format!("dec.{i}.cross_attn.wo"), &l.cross_attn.wo));
            out.push((format!("dec.{i}.ln3.gain"), &l.ln3.gain));
            out.push((format!("dec.{i}.ln3.bias"), &l.ln3.bias));
            out.push((format!("dec.{i}.ffn.w1"), &l.w1));
            out.push((format!("dec.{i}.ffn.b1"), &l.b1));
            out.push((format!("dec.{i}.ffn.w2"), &l.w2));
            out.push((format!("dec.{i}.ffn.b2"), &l.b2));
        }
        out.push(("enc_ln.gain".into(), &self.enc_ln.gain));
        out.push(("enc_ln.bias".into(), &self.enc_ln.bias));
        out.push(("dec_ln.gain".into(), &self.dec_ln.gain));
        out.push(("dec_ln.bias".into(), &self.dec_ln.bias));
        out.push(("out.w".into(), &self.out_w));
        out.push(("out.b".into(), &self.out_b));
        out
    }

    /// Mutable view of the same groups, same order.
    pub fn groups_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let ParamSet {
            tok,
            pos,
            lang,
            enc,
            dec,
            enc_ln,
            dec_ln,
            out_w,
            out_b,
        } = self;
        let mut out: Vec<(String, &mut Vec<f64>)> = vec![
            ("tok_embed".into(), tok),
            ("pos_embed".into(), pos),
            ("lang_embed".into(), lang),
        ];
        for (i, l) in enc.iter_mut().enumerate() {
            let EncLayerParams {
                ln1,
                attn,
                ln2,
                w1,
                b1,
                w2,
                b2,
            } = l;
            out.push((format!("enc.{i}.ln1.gain"), &mut ln1.gain));
            out.push((format!("enc.{i}.ln1.bias"), &mut ln1.bias));
            out.push((format!("enc.{i}.attn.wq"), &mut attn.wq));
            out.push((format!("enc.{i}.attn.wk"), &mut attn.wk));
            out.push((format!("enc.{i}.attn.wv"), &mut attn.wv));
            out.push((format!("enc.{i}.attn.wo"), &mut attn.wo));
            out.push((format!("enc.{i}.ln2.gain"), &mut ln2.gain));
            out.push((format!("enc.{i}.ln2.bias"), &mut ln2.bias));
            out.push((format!("enc.{i}.ffn.w1"), w1));
            out.push((format!("enc.{i}.ffn.b1"), b1));
            out.push((format!("enc.{i}.ffn.w2"), w2));
            out.push((format!("enc.{i}.ffn.b2"), b2));
        }
        for (i, l) in dec.iter_mut().enumerate() {
            let DecLayerParams {
                ln1,
                self_attn,
                ln2,
                cross_attn,
                ln3,
                w1,
                b1,
                w2,
                b2,
            } = l;
            out.push((format!("dec.{i}.ln1.gain"), &mut ln1.gain));
            out.push((format!("dec.{i}.ln1.bias"), &mut ln1.bias));
            out.push((format!("dec.{i}.self_attn.wq"), &mut self_attn.wq));
            out.push((format!("dec.{i}.self_attn.wk"), &mut self_attn.wk));
            out.push((format!("dec.{i}.self_attn.wv"), &mut self_attn.wv));
            out.push((format!("dec.{i}.self_attn.wo"), &mut self_attn.wo));
            out.push((format!("dec.{i}.ln2.gain"), &mut ln2.gain));
            out.push((format!("dec.{i}.ln2.bias"), &mut ln2.bias));
            out.push((format!("dec.{i}.cross_attn.wq"), &mut cross_attn.wq));
            out.push((format!("dec.{i}.cross_attn.wk"), &mut cross_attn.wk));
            out.push((format!("dec.{i}.cross_attn.wv"), &mut cross_attn.wv));
            out.push((format!("dec.{i}.cross_attn.wo"), &mut cross_attn.wo));
            out.push((format!("dec.{i}.ln3.gain"), &mut ln3.gain));
            out.push((format!("dec.{i}.ln3.bias"), &mut ln3.bias));
            out.push((format!("dec.{i}.ffn.w1"), w1));
            out.push((format!("dec.{i}.ffn.b1"), b1));
            out.push((format!("dec.{i}.ffn.w2"), w2));
            out.push((format!("dec.{i}.ffn.b2"), b2));
        }
        let LnParams { gain, bias } = enc_ln;
        out.push(("enc_ln.gain".into(), gain));
        out.push(("enc_ln.bias".into(), bias));
        let LnParams { gain, bias } = dec_ln;
        out.push(("dec_ln.gain".into(), gain));
        out.push(("dec_ln.bias".into(), bias));
        out.push(("out.w".into(), out_w));
        out.push(("out.b".into(), out_b));
        out
    }

    pub fn total_len(&self) -> usize {
        self.groups().iter().map(|(_, g)| g.len()).sum()
    }
}

/// Shapes of every parameter group, in the canonical group order.
pub fn group_shapes(cfg: &ModelConfig, num_langs: usize) -> Vec<(String, Vec<usize>)> {
    let zero = ParamSet::zeros(cfg, num_langs);
    let (v, m, d, f) = (cfg.vocab_size, cfg.max_len, cfg.embed_dim, cfg.hidden_dim);
    zero.groups()
        .into_iter()
        .map(|(name, data)| {
            let shape: Vec<usize> = if name == "tok_embed" {
                vec![v, d]
            } else if name == "pos_embed" {
                vec![m, d]
            } else if name == "lang_embed" {
                vec![num_langs, d]
            } else if name.contains("attn") {
                vec![d, d]
            } else if name.ends_with("ffn.w1") {
                vec![d, f]
            } else if name.ends_with("ffn.w2") {
                vec![f, d]
            } else if name == "out.w" {
                vec![d, v]
            } else {
                vec![data.len()]
            };
            debug_assert_eq!(shape.iter().product::<usize>(), data.len());
            (name, shape)
        })
        .collect()
}

// -------------------------------------------------------------------- model

/// A translation model: parameters plus the language list that fixes the
/// language-embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    pub config: ModelConfig,
    pub langs: Vec<LangId>,
    pub params: ParamSet,
}

impl Seq2SeqModel {
    pub fn lang_index(&self, lang: &LangId) -> Result<usize> {
        self.langs
            .iter()
            .position(|l| l == lang)
            .ok_or_else(|| Error::Model(format!("unknown language {lang}")))
    }
}

/// Initializes a model with seeded scaled-uniform weights: layer-norm
/// gains start at one, biases at zero, embeddings uniform within
/// ±1/√embed_dim, and weight matrices uniform within ±√(6/(fan_in+fan_out)).
/// The same seed always produces bitwise-identical parameters.
pub fn init_model(config: &ModelConfig, langs: &[LangId]) -> Result<Seq2SeqModel> {
    config.validate()?;
    if langs.is_empty() {
        return Err(Error::Model("model needs at least one language".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for l in langs {
        if !seen.insert(l.name()) {
            return Err(Error::Model(format!("duplicate language {l}")));
        }
    }
    let mut params = ParamSet::zeros(config, langs.len());
    let shapes = group_shapes(config, langs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let embed_bound = 1.0 / (config.embed_dim as f64).sqrt();
    for ((name, data), (sname, shape)) in params.groups_mut().into_iter().zip(&shapes) {
        debug_assert_eq!(&name, sname);
        if name.ends_with(".gain") {
            data.fill(1.0);
        } else if name.ends_with(".bias") || name.ends_with(".b1") || name.ends_with(".b2")
            || name == "out.b"
        {
            // already zero
        } else if name.ends_with("_embed") {
            for v in data.iter_mut() {
                *v = rng.gen_range(-embed_bound..embed_bound);
            }
        } else {
            let bound = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
            for v in data.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
    }
    Ok(Seq2SeqModel {
        config: config.clone(),
        langs: langs.to_vec(),
        params,
    })
}

// -------------------------------------------------------------------- batch

/// A training batch: ragged source and target id sequences plus their
/// language tags. Sequences keep their true lengths, so no position is
/// ever padding — the padding mask is derivable and trivially honored.
#[derive(Debug, Clone)]
pub struct Batch {
    pub src_lang: LangId,
    pub tgt_lang: LangId,
    pub src: Vec<Vec<usize>>,
    pub tgt: Vec<Vec<usize>>,
}

impl Batch {
    /// Mask over a rectangular [pair, max_len] view: true where a real
    /// token sits, false where padding would be.
    pub fn padding_mask(&self) -> Vec<Vec<bool>> {
        let width = self.src.iter().map(Vec::len).max().unwrap_or(0);
        self.src
            .iter()
            .map(|s| (0..width).map(|t| t < s.len()).collect())
            .collect()
    }
}

fn check_ids(ids: &[usize], vocab: usize, what: &str) -> Result<()> {
    for &id in ids {
        if id >= vocab {
            return Err(Error::Model(format!(
                "{what} id {id} out of range for vocab of {vocab}"
            )));
        }
    }
    Ok(())
}

fn validate_batch(model: &Seq2SeqModel, batch: &Batch) -> Result<(usize, usize)> {
    if batch.src.len() != batch.tgt.len() {
        return Err(Error::Model(format!(
            "batch has {} source but {} target sequences",
            batch.src.len(),
            batch.tgt.len()
        )));
    }
    if batch.src.is_empty() {
        return Err(Error::Model("empty batch".into()));
    }
    let cfg = &model.config;
    for (src, tgt) in batch.src.iter().zip(&batch.tgt) {
        if src.is_empty() {
            return Err(Error::Model("empty source sequence in batch".into()));
        }
        if src.len() > cfg.max_len {
            return Err(Error::Model(format!(
                "source length {} exceeds max_len {}",
                src.len(),
                cfg.max_len
            )));
        }
        if tgt.len() + 1 > cfg.max_len {
            return Err(Error::Model(format!(
                "target length {} exceeds max_len {} (one slot is reserved for begin-of-sequence)",
                tgt.len(),
                cfg.max_len - 1
            )));
        }
        check_ids(src, cfg.vocab_size, "source")?;
        check_ids(tgt, cfg.vocab_size, "target")?;
    }
    Ok((
        model.lang_index(&batch.src_lang)?,
        model.lang_index(&batch.tgt_lang)?,
    ))
}

// ------------------------------------------------------------ loss and step

/// Decoder input ([bos] + tgt) and prediction targets (tgt + [eos]).
fn teacher_forcing(tgt: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut dec_in = Vec::with_capacity(tgt.len() + 1);
    dec_in.push(BOS_ID);
    dec_in.extend_from_slice(tgt);
    let mut targets = tgt.to_vec();
    targets.push(EOS_ID);
    (dec_in, targets)
}

/// Cross-entropy of the batch under teacher forcing together with the
/// gradient of every parameter. The loss is the mean negative
/// log-likelihood per target position (end-of-sequence included), so it
/// does not depend on how sequences are ordered or grouped.
pub fn forward_loss(model: &Seq2SeqModel, batch: &Batch) -> Result<(f64, Gradients)> {
    let (src_lang, tgt_lang) = validate_batch(model, batch)?;
    let cfg = &model.config;
    let p = &model.params;
    let d = cfg.embed_dim;
    let total_positions: usize = batch.tgt.iter().map(|t| t.len() + 1).sum();
    let scale = 1.0 / total_positions as f64;
    let mut grads = ParamSet::zeros(cfg, model.langs.len());
    let mut loss = 0.0;
    for (src, tgt) in batch.src.iter().zip(&batch.tgt) {
        let (dec_in, targets) = teacher_forcing(tgt);
        let (enc_out, enc_cache) = net::encode(p, cfg, src, src_lang);
        let (dec_out, dec_cache) = net::decode_states(p, cfg, &enc_out, src.len(), &dec_in, tgt_lang);
        let rows: Vec<(usize, usize)> = targets.iter().copied().enumerate().collect();
        let (nll, dlogits) = net::nll_rows(
            &dec_out,
            dec_in.len(),
            d,
            &p.out_w,
            &p.out_b,
            cfg.vocab_size,
            &rows,
            scale,
        );
        loss += nll * scale;
        let mut ddec = vec![0.0; dec_in.len() * d];
        net::out_proj_bwd(
            &dec_out,
            &dlogits,
            dec_in.len(),
            d,
            cfg.vocab_size,
            &p.out_w,
            &mut grads.out_w,
            &mut grads.out_b,
            &mut ddec,
        );
        let denc = net::decode_bwd(
            &ddec, &dec_cache, p, cfg, &enc_out, src.len(), &dec_in, tgt_lang, &mut grads,
        );
        net::encode_bwd(&denc, &enc_cache, p, cfg, src, src_lang, &mut grads);
    }
    Ok((loss, grads))
}

/// Loss only, no gradients — used for evaluation and derivative checks.
pub fn loss_only(model: &Seq2SeqModel, batch: &Batch) -> Result<f64> {
    let (src_lang, tgt_lang) = validate_batch(model, batch)?;
    let cfg = &model.config;
    let p = &model.params;
    let total_positions: usize = batch.tgt.iter().map(|t| t.len() + 1).sum();
    let mut loss = 0.0;
    for (src, tgt) in batch.src.iter().zip(&batch.tgt) {
        let (dec_in, targets) = teacher_forcing(tgt);
        let (enc_out, _) = net::encode(p, cfg, src, src_lang);
        let (dec_out, _) = net::decode_states(p, cfg, &enc_out, src.len(), &dec_in, tgt_lang);
        let rows: Vec<(usize, usize)> = targets.iter().copied().enumerate().collect();
        let (nll, _) = net::nll_rows(
            &dec_out,
            dec_in.len(),
            cfg.embed_dim,
            &p.out_w,
            &p.out_b,
            cfg.vocab_size,
            &rows,
            0.0,
        );
        loss += nll;
    }
    Ok(loss / total_positions as f64)
}

/// Ceiling on the global L2 gradient norm inside [`grad_step`]. Keeps
/// long constant-rate SGD runs from being destroyed by the occasional
/// exploding batch; a deterministic rescale, not an adaptive optimizer.
pub const GRAD_CLIP_NORM: f64 = 5.0;

/// One plain-SGD update: p ← p − lr·s·g for every parameter, where s
/// rescales the whole gradient to global L2 norm [`GRAD_CLIP_NORM`] when
/// it exceeds that bound (s = 1 otherwise). Gradient and parameter
/// layouts must match exactly.
pub fn grad_step(model: &mut Seq2SeqModel, grads: &Gradients, lr: f64) -> Result<()> {
    if !lr.is_finite() {
        return Err(Error::Model(format!("non-finite learning rate {lr}")));
    }
    let gg = grads.groups();
    let sq_sum: f64 = gg
        .iter()
        .map(|(_, g)| g.iter().map(|v| v * v).sum::<f64>())
        .sum();
    let norm = sq_sum.sqrt();
    let scale = if norm > GRAD_CLIP_NORM {
        GRAD_CLIP_NORM / norm
    } else {
        1.0
    };
    let pg = model.params.groups_mut();
    if gg.len() != pg.len() {
        return Err(Error::Model("gradient layout does not match model".into()));
    }
    for ((pname, pvec), (gname, gvec)) in pg.into_iter().zip(gg) {
        if pname != gname || pvec.len() != gvec.len() {
            return Err(Error::Model(format!(
                "gradient group {gname} ({}) does not match parameter group {pname} ({})",
                gvec.len(),
                pvec.len()
            )));
        }
        for (p, g) in pvec.iter_mut().zip(gvec) {
            *p -= lr * scale * g;
        }
    }
    Ok(())
}

// ------------------------------------------------------------------- decode

/// Greedy decoding: encode the source once, then repeatedly feed the
/// grown prefix through the decoder and take the argmax token (lowest id
/// wins ties). Stops at end-of-sequence or after `max_len` tokens;
/// control ids never appear in the output.
pub fn greedy_decode(
    model: &Seq2SeqModel,
    src: &[usize],
    src_lang: &LangId,
    tgt_lang: &LangId,
    max_len: usize,
) -> Result<Vec<usize>> {
    assert!(!src.is_empty(), "greedy_decode requires a non-empty source");
    let cfg = &model.config;
    let src_idx = model.lang_index(src_lang)?;
    let tgt_idx = model.lang_index(tgt_lang)?;
    check_ids(src, cfg.vocab_size, "source")?;
    if src.len() > cfg.max_len {
        return Err(Error::Model(format!(
            "source length {} exceeds max_len {}",
            src.len(),
            cfg.max_len
        )));
    }
    let p = &model.params;
    let (enc_out, _) = net::encode(p, cfg, src, src_idx);
    let mut dec_in = vec![BOS_ID];
    let mut out = Vec::new();
    let limit = max_len.min(cfg.max_len - 1);
    while out.len() < limit {
        let (states, _) = net::decode_states(p, cfg, &enc_out, src.len(), &dec_in, tgt_idx);
        let logits = net::last_row_logits(
            &states,
            dec_in.len(),
            cfg.embed_dim,
            &p.out_w,
            &p.out_b,
            cfg.vocab_size,
        );
        let mut best = EOS_ID;
        let mut best_v = f64::NEG_INFINITY;
        for (id, &v) in logits.iter().enumerate() {
            if id == PAD_ID || id == BOS_ID || id == MASK_ID {
                continue;
            }
            if v > best_v {
                best_v = v;
                best = id;
            }
        }
        if best == EOS_ID {
            break;
        }
        out.push(best);
        dec_in.push(best);
    }
    Ok(out)
}

// ---------------------------------------------------------------------- mlm

/// Result of one masked-LM step.
#[derive(Debug)]
pub struct MlmOutcome {
    pub loss: f64,
    pub grads: Gradients,
    /// Total number of masked positions contributing to the loss.
    pub masked_positions: usize,
    /// Sentences skipped because they were too short to mask a token
    /// while keeping at least one token of context.
    pub skipped_sentences: usize,
}

/// One masked-LM pretraining step over monolingual sentences: in each
/// sentence of length ≥ 2, ⌈mask_rate·len⌉ positions (at most len − 1)
/// are replaced by the reserved mask id, the encoder output at exactly
/// those positions is scored against the original tokens, and the loss
/// is the mean over all masked positions. Single-token sentences are
/// skipped and counted in the outcome.
pub fn mlm_step(
    model: &Seq2SeqModel,
    sentences: &[Vec<usize>],
    lang: &LangId,
    mask_rate: f64,
    rng: &mut impl Rng,
) -> Result<MlmOutcome> {
    if !(mask_rate > 0.0 && mask_rate <= 1.0) {
        return Err(Error::Model(format!(
            "mask_rate must be in (0, 1], got {mask_rate}"
        )));
    }
    let lang_idx = model.lang_index(lang)?;
    let cfg = &model.config;
    let mut prepared: Vec<(Vec<usize>, Vec<(usize, usize)>)> = Vec::new();
    let mut skipped = 0usize;
    for ids in sentences {
        check_ids(ids, cfg.vocab_size, "sentence")?;
        if ids.len() > cfg.max_len {
            return Err(Error::Model(format!(
                "sentence length {} exceeds max_len {}",
                ids.len(),
                cfg.max_len
            )));
        }
        if ids.len() < 2 {
            skipped += 1;
            continue;
        }
        let m = (((mask_rate * ids.len() as f64).ceil() as usize).max(1)).min(ids.len() - 1);
        let picks = rand::seq::index::sample(rng, ids.len(), m).into_vec();
        let mut masked = ids.clone();
        let mut targets: Vec<(usize, usize)> =
            picks.into_iter().map(|pos| (pos, ids[pos])).collect();
        targets.sort_unstable();
        for &(pos, _) in &targets {
            masked[pos] = MASK_ID;
        }
        prepared.push((masked, targets));
    }
    mlm_forward(model, &prepared, lang_idx, skipped)
}

/// Core of the masked-LM step, with mask positions already chosen —
/// kept separate so derivative checks can pin the masking.
fn mlm_forward(
    model: &Seq2SeqModel,
    prepared: &[(Vec<usize>, Vec<(usize, usize)>)],
    lang_idx: usize,
    skipped: usize,
) -> Result<MlmOutcome> {
    let cfg = &model.config;
    let p = &model.params;
    let d = cfg.embed_dim;
    let total_masked: usize = prepared.iter().map(|(_, t)| t.len()).sum();
    let mut grads = ParamSet::zeros(cfg, model.langs.len());
    if total_masked == 0 {
        return Ok(MlmOutcome {
            loss: 0.0,
            grads,
            masked_positions: 0,
            skipped_sentences: skipped,
        });
    }
    let scale = 1.0 / total_masked as f64;
    let mut loss = 0.0;
    for (masked_ids, targets) in prepared {
        let t = masked_ids.len();
        let (enc_out, enc_cache) = net::encode(p, cfg, masked_ids, lang_idx);
        let (nll, dlogits) = net::nll_rows(
            &enc_out,
            t,
            d,
            &p.out_w,
            &p.out_b,
            cfg.vocab_size,
            targets,
            scale,
        );
        loss += nll * scale;
        let mut denc = vec![0.0; t * d];
        net::out_proj_bwd(
            &enc_out,
            &dlogits,
            t,
            d,
            cfg.vocab_size,
            &p.out_w,
            &mut grads.out_w,
            &mut grads.out_b,
            &mut denc,
        );
        net::encode_bwd(&denc, &enc_cache, p, cfg, masked_ids, lang_idx, &mut grads);
    }
    Ok(MlmOutcome {
        loss,
        grads,
        masked_positions: total_masked,
        skipped_sentences: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::UNK_ID;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            vocab_size: 12,
            max_len: 8,
            embed_dim: 8,
            hidden_dim: 12,
            num_layers: 1,
            num_heads: 2,
            learning_rate: 0.1,
            seed: 7,
        }
    }

    fn langs2() -> Vec<LangId> {
        vec![LangId::new("xx"), LangId::new("yy")]
    }

    fn tiny_batch() -> Batch {
        Batch {
            src_lang: LangId::new("xx"),
            tgt_lang: LangId::new("yy"),
            src: vec![vec![5, 6, 7], vec![8, 9]],
            tgt: vec![vec![6, 5], vec![9, 10, 11]],
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_cfg();
        assert!(cfg.validate().is_ok());
        cfg.num_heads = 3; // 8 % 3 != 0
        assert!(cfg.validate().is_err());
        cfg = tiny_cfg();
        cfg.vocab_size = NUM_RESERVED;
        assert!(cfg.validate().is_err());
        cfg = tiny_cfg();
        cfg.num_layers = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn param_count_matches_closed_form() {
        let cfg = tiny_cfg();
        let model = init_model(&cfg, &langs2()).unwrap();
        assert_eq!(model.params.total_len(), cfg.param_count(2));
        // Hand-computed for this configuration:
        // embeds (12+8+2)*8 = 176, enc 4*64+2*8*12+12+40 = 500,
        // dec 8*64+192+12+56 = 772, final norms 32, out 8*12+12 = 108.
        assert_eq!(cfg.param_count(2), 176 + 500 + 772 + 32 + 108);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = tiny_cfg();
        let a = init_model(&cfg, &langs2()).unwrap();
        let b = init_model(&cfg, &langs2()).unwrap();
        assert_eq!(a.params, b.params);
        let c = init_model(
            &ModelConfig {
                seed: 8,
                ..tiny_cfg()
            },
            &langs2(),
        )
        .unwrap();
        assert_ne!(a.params, c.params);
        for (name, g) in a.params.groups() {
            for &v in g.iter() {
                assert!(v.is_finite(), "{name} has a non-finite value");
                assert!(v.abs() <= 1.0, "{name} value {v} outside init bounds");
            }
            if name.ends_with(".gain") {
                assert!(g.iter().all(|&v| v == 1.0));
            }
            if name.ends_with(".bias") || name == "out.b" {
                assert!(g.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn group_names_align_between_views_and_shapes() {
        let cfg = tiny_cfg();
        let mut model = init_model(&cfg, &langs2()).unwrap();
        let names: Vec<String> = model.params.groups().into_iter().map(|(n, _)| n).collect();
        let names_mut: Vec<String> = model
            .params
            .groups_mut()
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        let shape_names: Vec<String> = group_shapes(&cfg, 2).into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, names_mut);
        assert_eq!(names, shape_names);
        for ((_, g), (_, shape)) in model.params.groups().iter().zip(group_shapes(&cfg, 2)) {
            assert_eq!(g.len(), shape.iter().product::<usize>());
        }
    }

    #[test]
    fn zero_params_give_uniform_loss() {
        let cfg = tiny_cfg();
        let mut model = init_model(&cfg, &langs2()).unwrap();
        model.params = ParamSet::zeros(&cfg, 2);
        let (loss, _) = forward_loss(&model, &tiny_batch()).unwrap();
        assert!((loss - (cfg.vocab_size as f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn loss_only_agrees_with_forward_loss() {
        let model = init_model(&tiny_cfg(), &langs2()).unwrap();
        let batch = tiny_batch();
        let (a, _) = forward_loss(&model, &batch).unwrap();
        let b = loss_only(&model, &batch).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn loss_is_batch_order_invariant() {
        let model = init_model(&tiny_cfg(), &langs2()).unwrap();
        let batch = tiny_batch();
        let mut flipped = batch.clone();
        flipped.src.reverse();
        flipped.tgt.reverse();
        let (a, ga) = forward_loss(&model, &batch).unwrap();
        let (b, gb) = forward_loss(&model, &flipped).unwrap();
        assert!((a - b).abs() < 1e-9);
        for (x, y) in ga.tok.iter().zip(&gb.tok) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn batch_validation_errors() {
        let model = init_model(&tiny_cfg(), &langs2()).unwrap();
        let mut b = tiny_batch();
        b.src[0] = vec![];
        assert!(forward_loss(&model, &b).is_err());
        let mut b = tiny_batch();
        b.tgt[0] = vec![99, 5];
        assert!(forward_loss(&model, &b).is_err());
        let mut b = tiny_batch();
        b.src_lang = LangId::new("zz");
        assert!(forward_loss(&model, &b).is_err());
        let mut b = tiny_batch();
        b.src[0] = vec![5; 9]; // max_len is 8
        assert!(forward_loss(&model, &b).is_err());
        let mut b = tiny_batch();
        b.tgt[0] = vec![5; 8]; // 8 + bos > max_len
        assert!(forward_loss(&model, &b).is_err());
    }

    #[test]
    fn padding_mask_marks_real_tokens() {
        let b = tiny_batch();
        let mask = b.padding_mask();
        assert_eq!(mask[0], vec![true, true, true]);
        assert_eq!(mask[1], vec![true, true, false]);
    }

    #[test]
    fn grad_step_zero_lr_is_identity() {
        let mut model = init_model(&tiny_cfg(), &langs2()).unwrap();
        let before = model.params.clone();
        let (_, grads) = forward_loss(&model, &tiny_batch()).unwrap();
        grad_step(&mut model, &grads, 0.0).unwrap();
        assert_eq!(model.params, before);
    }

    #[test]
    fn grad_step_clips_only_oversized_gradients() {
        let cfg = tiny_cfg();
        let model = init_model(&cfg, &langs2()).unwrap();
        let lr = 0.1;
        // Small gradient: exact p - lr*g.
        let mut small = ParamSet::zeros(&cfg, 2);
        small.groups_mut()[0].1[0] = 1.0;
        let mut m = model.clone();
        grad_step(&mut m, &small, lr).unwrap();
        let expect = model.params.groups()[0].1[0] - lr;
        assert!((m.params.groups()[0].1[0] - expect).abs() < 1e-15);
        // Oversized gradient: rescaled to global norm GRAD_CLIP_NORM.
        let mut big = ParamSet::zeros(&cfg, 2);
        big.groups_mut()[0].1[0] = 30.0;
        big.groups_mut()[0].1[1] = 40.0; // norm 50
        let mut m = model.clone();
        grad_step(&mut m, &big, lr).unwrap();
        let scale = GRAD_CLIP_NORM / 50.0;
        let e0 = model.params.groups()[0].1[0] - lr * scale * 30.0;
        let e1 = model.params.groups()[0].1[1] - lr * scale * 40.0;
        assert!((m.params.groups()[0].1[0] - e0).abs() < 1e-15);
        assert!((m.params.groups()[0].1[1] - e1).abs() < 1e-15);
    }

    #[test]
    fn grad_step_layout_mismatch_rejected() {
        let mut model = init_model(&tiny_cfg(), &langs2()).unwrap();
        let other = init_model(&tiny_cfg(), &[LangId::new("xx")]).unwrap();
        let grads = ParamSet::zeros(&tiny_cfg(), 1);
        drop(other);
        assert!(grad_step(&mut model, &grads, 0.1).is_err());
    }

    #[test]
    fn grad_step_decreases_loss_on_fixed_batch() {
        let mut model = init_model(&tiny_cfg(), &langs2()).unwrap();
        let batch = tiny_batch();
        let (before, grads) = forward_loss(&model, &batch).unwrap();
        grad_step(&mut model, &grads, 0.05).unwrap();
        let after = loss_only(&model, &batch).unwrap();
        assert!(
            after < before,
            "loss should drop after a step: {before} -> {after}"
        );
    }

    #[test]
    fn two_half_steps_approximate_one_full_step() {
        let cfg = tiny_cfg();
        let batch = tiny_batch();
        let lr = 1e-3;
        let mut one = init_model(&cfg, &langs2()).unwrap();
        let mut two = one.clone();
        let (_, g) = forward_loss(&one, &batch).unwrap();
        grad_step(&mut one, &g, lr).unwrap();
        let (_, g1) = forward_loss(&two, &batch).unwrap();
        grad_step(&mut two, &g1, lr / 2.0).unwrap();
        let (_, g2) = forward_loss(&two, &batch).unwrap();
        grad_step(&mut two, &g2, lr / 2.0).unwrap();
        // Difference is second order in lr; the update itself is first order.
        let mut max_diff = 0.0f64;
        let mut max_update = 0.0f64;
        for ((_, a), ((_, b), (_, g))) in one
            .params
            .groups()
            .into_iter()
            .zip(two.params.groups().into_iter().zip(g.groups()))
        {
            for i in 0..a.len() {
                max_diff = max_diff.max((a[i] - b[i]).abs());
                max_update = max_update.max((lr * g[i]).abs());
            }
        }
        assert!(
            max_diff < 0.05 * max_update.max(1e-12),
            "half-steps diverged: diff {max_diff}, update {max_update}"
        );
    }

    #[test]
    fn language_embedding_shifts_input_by_row_difference() {
        let model = init_model(&tiny_cfg(), &langs2()).unwrap();
        let d = model.config.embed_dim;
        let ids = vec![5, 6, 7];
        let a = net::embed(&model.params, &model.config, &ids, 0);
        let b = net::embed(&model.params, &model.config, &ids, 1);
        for t in 0..ids.len() {
            for j in 0..d {
                let want = model.params.lang[j] - model.params.lang[d + j];
                let got = a[t * d + j] - b[t * d + j];
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decode_emits_nothing_when_eos_dominates() {
        let cfg = tiny_cfg();
        let mut model = init_model(&cfg, &langs2()).unwrap();
        model.params = ParamSet::zeros(&cfg, 2);
        model.params.out_b[EOS_ID] = 10.0;
        let out = greedy_decode(
            &model,
            &[5, 6],
            &LangId::new("xx"),
            &LangId::new("yy"),
            10,
        )
        .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn decode_is_deterministic_and_never_emits_control_ids() {
        let model = init_model(&tiny_cfg(), &langs2()).unwrap();
        let a = greedy_decode(&model, &[5, 6, 7], &LangId::new("xx"), &LangId::new("yy"), 6)
            .unwrap();
        let b = greedy_decode(&model, &[5, 6, 7], &LangId::new("xx"), &LangId::new("yy"), 6)
            .unwrap();
        assert_eq!(a, b);
        assert!(a.len() <= 6);
        for id in a {
            assert!(id != PAD_ID && id != BOS_ID && id != MASK_ID && id != EOS_ID);
        }
    }

    #[test]
    fn decode_respects_requested_length_cap() {
        let cfg = tiny_cfg();
        let mut model = init_model(&cfg, &langs2()).unwrap();
        model.params = ParamSet::zeros(&cfg, 2);
        model.params.out_b[UNK_ID] = 10.0; // never emit end-of-sequence
        let out = greedy_decode(&model, &[5], &LangId::new("xx"), &LangId::new("yy"), 3)
            .unwrap();
        assert_eq!(out.len(), 3);
        // And the model's own max_len caps unbounded requests.
        let out = greedy_decode(&model, &[5], &LangId::new("xx"), &LangId::new("yy"), 999)
            .unwrap();
        assert_eq!(out.len(), cfg.max_len - 1);
    }

    #[test]
    fn copy_task_is_learned_quickly() {
        use rand::SeedableRng;
        let cfg = ModelConfig {
            vocab_size: 12,
            max_len: 8,
            embed_dim: 16,
            hidden_dim: 32,
            num_layers: 1,
            num_heads: 2,
            learning_rate: 0.15,
            seed: 3,
        };
        let langs = vec![LangId::new("xx")];
        let mut model = init_model(&cfg, &langs).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut batches = Vec::new();
        for _ in 0..40 {
            let mut src = Vec::new();
            for _ in 0..8 {
                let len = rng.gen_range(2..=4);
                src.push((0..len).map(|_| rng.gen_range(5..12)).collect::<Vec<_>>());
            }
            batches.push(Batch {
                src_lang: LangId::new("xx"),
                tgt_lang: LangId::new("xx"),
                src: src.clone(),
                tgt: src,
            });
        }
        for step in 0..400 {
            let batch = &batches[step % batches.len()];
            let (_, grads) = forward_loss(&model, batch).unwrap();
            grad_step(&mut model, &grads, 0.15).unwrap();
        }
        let mut ok = 0;
        let mut total = 0;
        for batch in batches.iter().take(5) {
            for src in &batch.src {
                total += 1;
                let out =
                    greedy_decode(&model, src, &LangId::new("xx"), &LangId::new("xx"), 8)
                        .unwrap();
                if &out == src {
                    ok += 1;
                }
            }
        }
        assert!(
            ok * 10 >= total * 9,
            "copy task should be mostly solved: {ok}/{total}"
        );
    }

    #[test]
    fn mlm_masks_and_skips_as_documented() {
        use rand::SeedableRng;
        let model = init_model(&tiny_cfg(), &langs2()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let sentences = vec![vec![5], vec![6, 7, 8, 9], vec![10]];
        let out = mlm_step(&model, &sentences, &LangId::new("xx"), 0.15, &mut rng).unwrap();
        assert_eq!(out.skipped_sentences, 2);
        assert_eq!(out.masked_positions, 1); // ceil(0.15 * 4) = 1
        assert!(out.loss > 0.0);
        // Rate 1.0 still keeps one token of context.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let out = mlm_step(&model, &[vec![6, 7, 8, 9]], &LangId::new("xx"), 1.0, &mut rng)
            .unwrap();
        assert_eq!(out.masked_positions, 3);
    }

    #[test]
    fn mlm_all_skipped_yields_zero_grads() {
        use rand::SeedableRng;
        let model = init_model(&tiny_cfg(), &langs2()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let out = mlm_step(&model, &[vec![5], vec![6]], &LangId::new("xx"), 0.15, &mut rng)
            .unwrap();
        assert_eq!(out.skipped_sentences, 2);
        assert_eq!(out.masked_positions, 0);
        assert_eq!(out.loss, 0.0);
        assert!(out.grads.groups().iter().all(|(_, g)| g.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn mlm_zero_params_loss_is_uniform() {
        use rand::SeedableRng;
        let cfg = tiny_cfg();
        let mut model = init_model(&cfg, &langs2()).unwrap();
        model.params = ParamSet::zeros(&cfg, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let out = mlm_step(&model, &[vec![5, 6, 7, 8]], &LangId::new("xx"), 0.5, &mut rng)
            .unwrap();
        assert!((out.loss - (cfg.vocab_size as f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn mlm_gradient_touches_mask_row_not_original_rows() {
        use rand::SeedableRng;
        let model = init_model(&tiny_cfg(), &langs2()).unwrap();
        let d = model.config.embed_dim;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        // Mask everything maskable: 3 of 4 positions replaced.
        let out = mlm_step(&model, &[vec![5, 6, 7, 8]], &LangId::new("xx"), 1.0, &mut rng)
            .unwrap();
        let mask_row = &out.grads.tok[MASK_ID * d..(MASK_ID + 1) * d];
        assert!(mask_row.iter().any(|&v| v != 0.0));
        // An id absent from the batch gets no token-embedding gradient.
        let absent = &out.grads.tok[11 * d..12 * d];
        assert!(absent.iter().all(|&v| v == 0.0));
    }

    /// Central finite differences against the analytic gradient, every
    /// parameter group, translation path.
    #[test]
    fn finite_differences_match_analytic_gradients() {
        let cfg = tiny_cfg();
        let mut model = init_model(&cfg, &langs2()).unwrap();
        let batch = tiny_batch();
        let (_, grads) = forward_loss(&model, &batch).unwrap();
        let flat_grads: Vec<(String, Vec<f64>)> = grads
            .groups()
            .into_iter()
            .map(|(n, g)| (n, g.clone()))
            .collect();
        let eps = 1e-5;
        let n_groups = flat_grads.len();
        for gi in 0..n_groups {
            let len = flat_grads[gi].1.len();
            // Keep runtime sane: probe a deterministic subset of large groups.
            let stride = (len / 24).max(1);
            for k in (0..len).step_by(stride) {
                let orig = model.params.groups_mut()[gi].1[k];
                model.params.groups_mut()[gi].1[k] = orig + eps;
                let up = loss_only(&model, &batch).unwrap();
                model.params.groups_mut()[gi].1[k] = orig - eps;
                let down = loss_only(&model, &batch).unwrap();
                model.params.groups_mut()[gi].1[k] = orig;
                let fd = (up - down) / (2.0 * eps);
                let an = flat_grads[gi].1[k];
                let rel = (fd - an).abs() / (fd.abs() + an.abs()).max(1e-6);
                assert!(
                    rel < 1e-4,
                    "group {} index {k}: fd {fd:.3e} vs analytic {an:.3e} (rel {rel:.3e})",
                    flat_grads[gi].0
                );
            }
        }
    }

    /// Same check for the masked-LM path (exercises the encoder-only
    /// branch and masked-row selection).
    #[test]
    fn finite_differences_match_mlm_gradients() {
        let cfg = tiny_cfg();
        let mut model = init_model(&cfg, &langs2()).unwrap();
        let prepared = vec![
            (vec![MASK_ID, 6, 7, MASK_ID], vec![(0, 5), (3, 8)]),
            (vec![9, MASK_ID, 11], vec![(1, 10)]),
        ];
        let out = mlm_forward(&model, &prepared, 0, 0).unwrap();
        let flat_grads: Vec<(String, Vec<f64>)> = out
            .grads
            .groups()
            .into_iter()
            .map(|(n, g)| (n, g.clone()))
            .collect();
        let eps = 1e-5;
        for gi in 0..flat_grads.len() {
            let len = flat_grads[gi].1.len();
            let stride = (len / 12).max(1);
            for k in (0..len).step_by(stride) {
                let orig = model.params.groups_mut()[gi].1[k];
                model.params.groups_mut()[gi].1[k] = orig + eps;
                let up = mlm_forward(&model, &prepared, 0, 0).unwrap().loss;
                model.params.groups_mut()[gi].1[k] = orig - eps;
                let down = mlm_forward(&model, &prepared, 0, 0).unwrap().loss;
                model.params.groups_mut()[gi].1[k] = orig;
                let fd = (up - down) / (2.0 * eps);
                let an = flat_grads[gi].1[k];
                let rel = (fd - an).abs() / (fd.abs() + an.abs()).max(1e-6);
                assert!(
                    rel < 1e-4,
                    "group {} index {k}: fd {fd:.3e} vs analytic {an:.3e} (rel {rel:.3e})",
                    flat_grads[gi].0
                );
            }
        }
    }
}
