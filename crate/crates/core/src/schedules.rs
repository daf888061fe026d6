//! Training schedules: composing supervised translation, denoising
//! auto-encoding, back-translation, and cross translation into complete
//! architectures.
//!
//! A schedule names a focal language pair (X, Y) — X the distant side,
//! Y the low-resource side whose quality we care about — plus optional
//! reference languages R that are similar to Y and come with X–R parallel
//! data. Seven architectures are supported:
//!
//! * `supervised_baseline` — plain translation on focal parallel data.
//! * `unsupervised_baseline` — auto-encoding + back-translation on the
//!   focal pair's monolingual data only.
//! * `cascaded` — two separate models: supervised X↔R and unsupervised
//!   R↔Y; inference chains them through R.
//! * `unsup_dissimilar` — one model: supervised X↔R plus unsupervised
//!   X↔Y.
//! * `unsup_similar` — one model: supervised X↔R plus unsupervised R↔Y;
//!   X↔Y translation emerges through the shared representation.
//! * `unsup_dissimilar_ct` / `unsup_similar_ct` — the same plus cross
//!   translation: from an (x, r) parallel pair, decode an intermediate ŷ
//!   in the pivot Y and train on (ŷ → r) — and symmetrically (r̂-side)
//!   on (ŷ′ → x) — so the pivot language is exercised against real
//!   parallel signal.
//!
//! Every step applies exactly one loss term, chosen round-robin from a
//! plan built once per run; zero-weight terms are dropped from the plan
//! outright, so a disabled term changes nothing about the update
//! sequence. All randomness comes from labeled streams keyed by the
//! schedule seed, which makes whole runs bit-reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LangId, MonoCorpus, ParallelCorpus};
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{
    forward_loss, grad_step, greedy_decode, init_model, load_checkpoint, mlm_step,
    save_checkpoint, Batch, ModelConfig, Seq2SeqModel,
};
use crate::noise::{corrupt, NoiseConfig};
use crate::seeding::stream;
use crate::subword::{apply_bpe, learn_bpe, revert_bpe, BpeModel};
use crate::vocab::Vocab;

/// Extra tokens allowed beyond the source length when decoding
/// intermediate translations for back-translation and cross translation.
pub const DECODE_SLACK: usize = 4;

// ------------------------------------------------------------ architectures

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Cascaded,
    UnsupDissimilar,
    UnsupSimilar,
    UnsupDissimilarCt,
    UnsupSimilarCt,
    SupervisedBaseline,
    UnsupervisedBaseline,
}

impl Architecture {
    pub fn all() -> [Architecture; 7] {
        [
            Architecture::Cascaded,
            Architecture::UnsupDissimilar,
            Architecture::UnsupSimilar,
            Architecture::UnsupDissimilarCt,
            Architecture::UnsupSimilarCt,
            Architecture::SupervisedBaseline,
            Architecture::UnsupervisedBaseline,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Cascaded => "cascaded",
            Architecture::UnsupDissimilar => "unsup_dissimilar",
            Architecture::UnsupSimilar => "unsup_similar",
            Architecture::UnsupDissimilarCt => "unsup_dissimilar_ct",
            Architecture::UnsupSimilarCt => "unsup_similar_ct",
            Architecture::SupervisedBaseline => "supervised_baseline",
            Architecture::UnsupervisedBaseline => "unsupervised_baseline",
        }
    }

    fn uses_references(&self) -> bool {
        !matches!(
            self,
            Architecture::SupervisedBaseline | Architecture::UnsupervisedBaseline
        )
    }

    fn uses_ct(&self) -> bool {
        matches!(
            self,
            Architecture::UnsupDissimilarCt | Architecture::UnsupSimilarCt
        )
    }

    /// Architectures that must never see focal-pair parallel data during
    /// training (it exists only as held-out ground truth).
    fn focal_parallel_forbidden(&self) -> bool {
        !matches!(self, Architecture::SupervisedBaseline)
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Architecture> {
        Architecture::all()
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Schedule(format!("unknown architecture {s:?}")))
    }
}

// ----------------------------------------------------------------- schedule

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub mt: f64,
    pub ae: f64,
    pub bt: f64,
    pub ct: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            mt: 1.0,
            ae: 1.0,
            bt: 1.0,
            ct: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlmConfig {
    pub enabled: bool,
    pub mask_rate: f64,
    pub steps: usize,
}

impl Default for MlmConfig {
    fn default() -> Self {
        MlmConfig {
            enabled: true,
            mask_rate: 0.15,
            steps: 2000,
        }
    }
}

/// Model sizing as written in schedule files; the vocabulary size and
/// seed are filled in by the training run itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub max_len: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub learning_rate: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            max_len: 32,
            embed_dim: 64,
            hidden_dim: 128,
            num_layers: 2,
            num_heads: 2,
            learning_rate: 0.05,
        }
    }
}

impl ModelParams {
    pub fn to_config(self, vocab_size: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            vocab_size,
            max_len: self.max_len,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            num_layers: self.num_layers,
            num_heads: self.num_heads,
            learning_rate: self.learning_rate,
            seed,
        }
    }
}

fn default_validate_every() -> usize {
    200
}

fn default_val_pairs() -> usize {
    64
}

fn default_bpe_merges() -> usize {
    120
}

/// A complete description of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub architecture: Architecture,
    /// Focal pair (X, Y): X the distant side, Y the side of interest.
    pub focal: [String; 2],
    #[serde(default)]
    pub references: Vec<String>,
    pub steps: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub loss_weights: LossWeights,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub mlm: MlmConfig,
    pub seed: u64,
    #[serde(default = "default_validate_every")]
    pub validate_every: usize,
    #[serde(default = "default_val_pairs")]
    pub val_pairs: usize,
    #[serde(default = "default_bpe_merges")]
    pub bpe_merges: usize,
    #[serde(default)]
    pub model: ModelParams,
    /// Smaller configuration for the cascaded supervised sub-model.
    #[serde(default)]
    pub sup_model: Option<ModelParams>,
}

impl TrainSchedule {
    pub fn focal_x(&self) -> LangId {
        LangId::new(&self.focal[0])
    }

    pub fn focal_y(&self) -> LangId {
        LangId::new(&self.focal[1])
    }

    pub fn from_json(text: &str) -> Result<TrainSchedule> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn validate(&self) -> Result<()> {
        if self.focal[0] == self.focal[1] {
            return Err(Error::Schedule(format!(
                "focal pair must name two distinct languages, got {:?}",
                self.focal
            )));
        }
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::Schedule(
                "steps and batch_size must be positive".into(),
            ));
        }
        let refs: BTreeSet<&String> = self.references.iter().collect();
        if refs.len() != self.references.len() {
            return Err(Error::Schedule("duplicate reference language".into()));
        }
        if self.references.contains(&self.focal[0]) || self.references.contains(&self.focal[1]) {
            return Err(Error::Schedule(
                "a reference language cannot also be a focal language".into(),
            ));
        }
        if self.architecture.uses_references() {
            if self.references.is_empty() {
                return Err(Error::Schedule(format!(
                    "architecture {} needs at least one reference language",
                    self.architecture
                )));
            }
            if self.architecture == Architecture::Cascaded && self.references.len() != 1 {
                return Err(Error::Schedule(
                    "the cascaded architecture chains through exactly one reference language"
                        .into(),
                ));
            }
        } else if !self.references.is_empty() {
            return Err(Error::Schedule(format!(
                "architecture {} does not use reference languages",
                self.architecture
            )));
        }
        for (name, w) in [
            ("mt", self.loss_weights.mt),
            ("ae", self.loss_weights.ae),
            ("bt", self.loss_weights.bt),
            ("ct", self.loss_weights.ct),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Schedule(format!(
                    "loss weight {name} must be finite and non-negative, got {w}"
                )));
            }
        }
        if self.sup_model.is_some() && self.architecture != Architecture::Cascaded {
            return Err(Error::Schedule(
                "sup_model only applies to the cascaded architecture".into(),
            ));
        }
        Ok(())
    }

    /// Languages of the (primary) model, in a fixed order.
    fn model_langs(&self) -> Vec<LangId> {
        match self.architecture {
            Architecture::Cascaded => {
                // Primary (unsupervised) model: R and Y.
                vec![LangId::new(&self.references[0]), self.focal_y()]
            }
            Architecture::SupervisedBaseline | Architecture::UnsupervisedBaseline => {
                vec![self.focal_x(), self.focal_y()]
            }
            _ => {
                let mut langs = vec![self.focal_x(), self.focal_y()];
                langs.extend(self.references.iter().map(LangId::new));
                langs
            }
        }
    }
}

// ------------------------------------------------------------ schedule files

/// Corpora referenced by a schedule file. Paths are resolved against a
/// base directory supplied at load time; parallel corpora are TSV with
/// one `source<TAB>target` pair per line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorporaPaths {
    #[serde(default)]
    pub mono: Vec<MonoPath>,
    #[serde(default)]
    pub parallel: Vec<ParallelPath>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ParallelPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonoPath {
    pub lang: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelPath {
    pub src_lang: String,
    pub tgt_lang: String,
    pub path: String,
}

impl CorporaPaths {
    /// Loads every referenced corpus, resolving relative paths against
    /// `base`.
    pub fn load(&self, base: &Path) -> Result<DataBindings> {
        let resolve = |p: &str| base.join(p);
        let mut bindings = DataBindings::default();
        for m in &self.mono {
            bindings.mono.push(crate::corpus::load_mono(
                resolve(&m.path),
                LangId::new(m.lang.as_str()),
            )?);
        }
        for p in &self.parallel {
            bindings.parallel.push(crate::corpus::load_parallel_tsv(
                resolve(&p.path),
                LangId::new(p.src_lang.as_str()),
                LangId::new(p.tgt_lang.as_str()),
            )?);
        }
        if let Some(v) = &self.validation {
            bindings.validation = Some(crate::corpus::load_parallel_tsv(
                resolve(&v.path),
                LangId::new(v.src_lang.as_str()),
                LangId::new(v.tgt_lang.as_str()),
            )?);
        }
        Ok(bindings)
    }
}

/// On-disk run description: the schedule plus the corpora it binds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    #[serde(flatten)]
    pub schedule: TrainSchedule,
    #[serde(default)]
    pub corpora: CorporaPaths,
}

impl ScheduleFile {
    pub fn from_json(text: &str) -> Result<ScheduleFile> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

// ------------------------------------------------------------ data bindings

/// The corpora a run trains on. Validation data is the held-out focal
/// pair used only for periodic scoring — binding it as training parallel
/// data is rejected for every unsupervised architecture.
#[derive(Debug, Clone, Default)]
pub struct DataBindings {
    pub mono: Vec<MonoCorpus>,
    pub parallel: Vec<ParallelCorpus>,
    pub validation: Option<ParallelCorpus>,
}

fn same_pair(a: (&LangId, &LangId), b: (&LangId, &LangId)) -> bool {
    (a.0 == b.0 && a.1 == b.1) || (a.0 == b.1 && a.1 == b.0)
}

struct ResolvedData<'a> {
    /// lang → mono corpus
    mono: BTreeMap<String, &'a MonoCorpus>,
    /// reference name → X–R parallel corpus (cascaded/joint architectures)
    aux_parallel: BTreeMap<String, &'a ParallelCorpus>,
    /// focal parallel corpus (supervised baseline only)
    focal_parallel: Option<&'a ParallelCorpus>,
}

fn resolve_bindings<'a>(
    schedule: &TrainSchedule,
    data: &'a DataBindings,
) -> Result<ResolvedData<'a>> {
    let x = schedule.focal_x();
    let y = schedule.focal_y();

    let mut mono: BTreeMap<String, &MonoCorpus> = BTreeMap::new();
    for m in &data.mono {
        if mono.insert(m.lang.name().to_string(), m).is_some() {
            return Err(Error::Schedule(format!(
                "two monolingual corpora bound for {}",
                m.lang
            )));
        }
    }

    let mut aux_parallel: BTreeMap<String, &ParallelCorpus> = BTreeMap::new();
    let mut focal_parallel: Option<&ParallelCorpus> = None;
    for p in &data.parallel {
        if same_pair((&p.src_lang, &p.tgt_lang), (&x, &y)) {
            if schedule.architecture.focal_parallel_forbidden() {
                return Err(Error::Schedule(format!(
                    "architecture {} must not train on focal-pair parallel data ({}–{}); \
                     bind it as validation instead",
                    schedule.architecture, p.src_lang, p.tgt_lang
                )));
            }
            if focal_parallel.replace(p).is_some() {
                return Err(Error::Schedule("duplicate focal parallel corpus".into()));
            }
            continue;
        }
        let reference = schedule
            .references
            .iter()
            .find(|r| same_pair((&p.src_lang, &p.tgt_lang), (&x, &LangId::new(r.as_str()))));
        match reference {
            Some(r) if schedule.architecture.uses_references() => {
                if aux_parallel.insert(r.clone(), p).is_some() {
                    return Err(Error::Schedule(format!(
                        "two parallel corpora bound for {x}–{r}"
                    )));
                }
            }
            _ => {
                return Err(Error::Schedule(format!(
                    "parallel corpus {}–{} has no role in architecture {}",
                    p.src_lang, p.tgt_lang, schedule.architecture
                )));
            }
        }
    }

    // Per-architecture requirements.
    let need_mono: Vec<LangId> = match schedule.architecture {
        Architecture::SupervisedBaseline => vec![],
        Architecture::UnsupervisedBaseline => vec![x.clone(), y.clone()],
        Architecture::Cascaded => vec![LangId::new(&schedule.references[0]), y.clone()],
        Architecture::UnsupDissimilar | Architecture::UnsupDissimilarCt => {
            vec![x.clone(), y.clone()]
        }
        Architecture::UnsupSimilar | Architecture::UnsupSimilarCt => {
            let mut v: Vec<LangId> = schedule.references.iter().map(LangId::new).collect();
            v.push(y.clone());
            v
        }
    };
    for lang in &need_mono {
        if !mono.contains_key(lang.name()) {
            return Err(Error::Schedule(format!(
                "architecture {} needs a monolingual corpus for {lang}",
                schedule.architecture
            )));
        }
    }
    if schedule.architecture.uses_references() {
        for r in &schedule.references {
            if !aux_parallel.contains_key(r) {
                return Err(Error::Schedule(format!(
                    "architecture {} needs a parallel corpus {x}–{r}",
                    schedule.architecture
                )));
            }
        }
    }
    if schedule.architecture == Architecture::SupervisedBaseline && focal_parallel.is_none() {
        return Err(Error::Schedule(
            "supervised_baseline needs a focal-pair parallel corpus".into(),
        ));
    }
    if let Some(v) = &data.validation {
        if !same_pair((&v.src_lang, &v.tgt_lang), (&x, &y)) {
            return Err(Error::Schedule(format!(
                "validation corpus is {}–{}, expected the focal pair {x}–{y}",
                v.src_lang, v.tgt_lang
            )));
        }
    }

    Ok(ResolvedData {
        mono,
        aux_parallel,
        focal_parallel,
    })
}

// -------------------------------------------------------------- translator

/// A trained model bundled with everything needed to translate text:
/// the subword model and the symbol table.
#[derive(Debug, Clone)]
pub struct Translator {
    pub model: Seq2SeqModel,
    pub vocab: Vocab,
    pub bpe: BpeModel,
}

impl Translator {
    fn encode(&self, words: &[String]) -> Vec<usize> {
        self.vocab.encode(&apply_bpe(words, &self.bpe))
    }

    /// Greedy translation of one tokenized sentence. Empty input yields
    /// empty output.
    pub fn translate(
        &self,
        words: &[String],
        src: &LangId,
        tgt: &LangId,
    ) -> Result<Vec<String>> {
        if words.is_empty() {
            return Ok(Vec::new());
        }
        let mut ids = self.encode(words);
        let max_src = self.model.config.max_len;
        ids.truncate(max_src);
        let out = greedy_decode(&self.model, &ids, src, tgt, self.model.config.max_len - 1)?;
        Ok(revert_bpe(&self.vocab.decode(&out), &self.bpe))
    }

    /// Writes `model.ckpt` (+ manifest) and `bpe.txt` into a directory.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_checkpoint(&self.model, &self.vocab, &dir.join("model.ckpt"))?;
        self.bpe.save(dir.join("bpe.txt"))
    }

    pub fn load(dir: &Path) -> Result<Translator> {
        let (model, vocab) = load_checkpoint(&dir.join("model.ckpt"))?;
        let bpe = BpeModel::load(dir.join("bpe.txt"))?;
        Ok(Translator { model, vocab, bpe })
    }
}

/// Two-stage translation src → mid → tgt: decode with the supervised
/// model, feed the intermediate text to the unsupervised model. Returns
/// (final, intermediate). The models must share the subword model.
pub fn cascade_translate(
    sup: &Translator,
    unsup: &Translator,
    words: &[String],
    src: &LangId,
    mid: &LangId,
    tgt: &LangId,
) -> Result<(Vec<String>, Vec<String>)> {
    if sup.bpe.merges != unsup.bpe.merges {
        return Err(Error::Schedule(
            "cascaded models must share one subword model".into(),
        ));
    }
    for (model, lang) in [(&sup.model, src), (&sup.model, mid), (&unsup.model, mid), (&unsup.model, tgt)] {
        model.lang_index(lang)?;
    }
    let intermediate = sup.translate(words, src, mid)?;
    let out = unsup.translate(&intermediate, mid, tgt)?;
    Ok((out, intermediate))
}

// --------------------------------------------------------------- loss steps

/// Supervised translation step: teacher-forced cross-entropy on a
/// parallel batch, one gradient update. Returns the loss.
pub fn mt_step(model: &mut Seq2SeqModel, batch: &Batch, lr: f64) -> Result<f64> {
    let (loss, grads) = forward_loss(model, batch)?;
    grad_step(model, &grads, lr)?;
    Ok(loss)
}

/// Denoising auto-encoding step: reconstruct each sentence from its
/// corrupted version, source and target language both the batch
/// language. Corruption is resampled from `rng` on every call.
pub fn ae_step(
    model: &mut Seq2SeqModel,
    sentences: &[Vec<usize>],
    lang: &LangId,
    noise: &NoiseConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let batch = Batch {
        src_lang: lang.clone(),
        tgt_lang: lang.clone(),
        src: sentences
            .iter()
            .map(|s| corrupt(s, noise, rng))
            .collect(),
        tgt: sentences.to_vec(),
    };
    let (loss, grads) = forward_loss(model, &batch)?;
    grad_step(model, &grads, lr)?;
    Ok(loss)
}

/// Outcome of a step that goes through intermediate decoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedStep {
    pub loss: f64,
    pub trained_pairs: usize,
    /// Pairs dropped because the intermediate decode came back empty.
    pub skipped: usize,
}

/// Back-translation step: decode each sentence into the target language
/// (no gradients flow through this pass — decoding never touches
/// parameters), then train on (decoded → original). Empty decodes are
/// skipped and tallied.
pub fn bt_step(
    model: &mut Seq2SeqModel,
    sentences: &[Vec<usize>],
    src_lang: &LangId,
    tgt_lang: &LangId,
    lr: f64,
) -> Result<DecodedStep> {
    let cap = model.config.max_len - 1;
    let mut src = Vec::new();
    let mut tgt = Vec::new();
    let mut skipped = 0;
    for x in sentences {
        let hyp = greedy_decode(model, x, src_lang, tgt_lang, (x.len() + DECODE_SLACK).min(cap))?;
        if hyp.is_empty() {
            skipped += 1;
        } else {
            src.push(hyp);
            tgt.push(x.clone());
        }
    }
    if src.is_empty() {
        return Ok(DecodedStep {
            loss: 0.0,
            trained_pairs: 0,
            skipped,
        });
    }
    let batch = Batch {
        src_lang: tgt_lang.clone(),
        tgt_lang: src_lang.clone(),
        src,
        tgt,
    };
    let trained_pairs = batch.src.len();
    let (loss, grads) = forward_loss(model, &batch)?;
    grad_step(model, &grads, lr)?;
    Ok(DecodedStep {
        loss,
        trained_pairs,
        skipped,
    })
}

/// Cross-translation step: for parallel pairs (x, r), decode x into the
/// pivot language (gradient-free, as in back-translation), then train on
/// (pivot hypothesis → r).
pub fn ct_step(
    model: &mut Seq2SeqModel,
    pairs: &[(Vec<usize>, Vec<usize>)],
    src_lang: &LangId,
    pivot: &LangId,
    tgt_lang: &LangId,
    lr: f64,
) -> Result<DecodedStep> {
    let cap = model.config.max_len - 1;
    let mut src = Vec::new();
    let mut tgt = Vec::new();
    let mut skipped = 0;
    for (x, r) in pairs {
        let hyp = greedy_decode(model, x, src_lang, pivot, (x.len() + DECODE_SLACK).min(cap))?;
        if hyp.is_empty() {
            skipped += 1;
        } else {
            src.push(hyp);
            tgt.push(r.clone());
        }
    }
    if src.is_empty() {
        return Ok(DecodedStep {
            loss: 0.0,
            trained_pairs: 0,
            skipped,
        });
    }
    let batch = Batch {
        src_lang: pivot.clone(),
        tgt_lang: tgt_lang.clone(),
        src,
        tgt,
    };
    let trained_pairs = batch.src.len();
    let (loss, grads) = forward_loss(model, &batch)?;
    grad_step(model, &grads, lr)?;
    Ok(DecodedStep {
        loss,
        trained_pairs,
        skipped,
    })
}

/// One unsupervised round over the given batches: auto-encode X,
/// auto-encode Y, back-translate X→Y, back-translate Y→X, in that order.
/// Returns the per-term losses (their sum is the aggregate loss).
#[allow(clippy::too_many_arguments)]
pub fn unmt_epoch(
    model: &mut Seq2SeqModel,
    x_sentences: &[Vec<usize>],
    x_lang: &LangId,
    y_sentences: &[Vec<usize>],
    y_lang: &LangId,
    noise: &NoiseConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    out.push((
        format!("ae.{x_lang}"),
        ae_step(model, x_sentences, x_lang, noise, lr, rng)?,
    ));
    out.push((
        format!("ae.{y_lang}"),
        ae_step(model, y_sentences, y_lang, noise, lr, rng)?,
    ));
    out.push((
        format!("bt.{x_lang}-{y_lang}"),
        bt_step(model, x_sentences, x_lang, y_lang, lr)?.loss,
    ));
    out.push((
        format!("bt.{y_lang}-{x_lang}"),
        bt_step(model, y_sentences, y_lang, x_lang, lr)?.loss,
    ));
    Ok(out)
}

// -------------------------------------------------------------------- plans

/// One atomic update in the round-robin cycle.
#[derive(Debug, Clone, PartialEq)]
enum Term {
    /// Supervised step on a parallel corpus; `flip` swaps direction.
    Mt { key: String, flip: bool },
    Ae { lang: LangId },
    Bt { src: LangId, tgt: LangId },
    /// Cross translation on parallel corpus `key`; `flip` selects which
    /// side is decoded through the pivot.
    Ct { key: String, flip: bool, pivot: LangId },
}

impl Term {
    fn kind(&self) -> &'static str {
        match self {
            Term::Mt { .. } => "mt",
            Term::Ae { .. } => "ae",
            Term::Bt { .. } => "bt",
            Term::Ct { .. } => "ct",
        }
    }

    fn label(&self) -> String {
        match self {
            Term::Mt { key, flip } => {
                format!("mt.{key}.{}", if *flip { "rev" } else { "fwd" })
            }
            Term::Ae { lang } => format!("ae.{lang}"),
            Term::Bt { src, tgt } => format!("bt.{src}-{tgt}"),
            Term::Ct { key, flip, pivot } => {
                format!("ct.{key}.{}.via.{pivot}", if *flip { "rev" } else { "fwd" })
            }
        }
    }
}

/// Builds the round-robin cycle for the (primary) model of a schedule.
/// Terms whose loss weight is zero are omitted entirely.
fn build_plan(schedule: &TrainSchedule) -> Vec<Term> {
    let x = schedule.focal_x();
    let y = schedule.focal_y();
    let w = &schedule.loss_weights;
    let mut plan = Vec::new();
    let push_mt = |plan: &mut Vec<Term>, key: &str| {
        if w.mt > 0.0 {
            plan.push(Term::Mt {
                key: key.to_string(),
                flip: false,
            });
            plan.push(Term::Mt {
                key: key.to_string(),
                flip: true,
            });
        }
    };
    let push_unmt = |plan: &mut Vec<Term>, a: &LangId, b: &LangId| {
        if w.ae > 0.0 {
            plan.push(Term::Ae { lang: a.clone() });
            plan.push(Term::Ae { lang: b.clone() });
        }
        if w.bt > 0.0 {
            plan.push(Term::Bt {
                src: a.clone(),
                tgt: b.clone(),
            });
            plan.push(Term::Bt {
                src: b.clone(),
                tgt: a.clone(),
            });
        }
    };
    match schedule.architecture {
        Architecture::SupervisedBaseline => push_mt(&mut plan, "focal"),
        Architecture::UnsupervisedBaseline => push_unmt(&mut plan, &x, &y),
        Architecture::Cascaded => {
            // Primary model is the unsupervised R↔Y half; the supervised
            // half has its own plan (see train()).
            let r = LangId::new(&schedule.references[0]);
            push_unmt(&mut plan, &r, &y);
        }
        Architecture::UnsupDissimilar | Architecture::UnsupDissimilarCt => {
            for r in &schedule.references {
                push_mt(&mut plan, r);
            }
            push_unmt(&mut plan, &x, &y);
            if schedule.architecture.uses_ct() && w.ct > 0.0 {
                for r in &schedule.references {
                    plan.push(Term::Ct {
                        key: r.clone(),
                        flip: false,
                        pivot: y.clone(),
                    });
                    plan.push(Term::Ct {
                        key: r.clone(),
                        flip: true,
                        pivot: y.clone(),
                    });
                }
            }
        }
        Architecture::UnsupSimilar | Architecture::UnsupSimilarCt => {
            for r in &schedule.references {
                push_mt(&mut plan, r);
            }
            for r in &schedule.references {
                push_unmt(&mut plan, &LangId::new(r), &y);
            }
            if schedule.architecture.uses_ct() && w.ct > 0.0 {
                for r in &schedule.references {
                    plan.push(Term::Ct {
                        key: r.clone(),
                        flip: false,
                        pivot: y.clone(),
                    });
                    plan.push(Term::Ct {
                        key: r.clone(),
                        flip: true,
                        pivot: y.clone(),
                    });
                }
            }
        }
    }
    plan
}

// ----------------------------------------------------------------- training

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub step: usize,
    pub term: String,
    pub value: f64,
}

pub fn format_log(entries: &[LogEntry]) -> String {
    let mut out = String::from("step\tloss_term\tvalue\n");
    for e in entries {
        let _ = writeln!(out, "{}\t{}\t{:.6}", e.step, e.term, e.value);
    }
    out
}

pub fn write_log(entries: &[LogEntry], path: &Path) -> Result<()> {
    std::fs::write(path, format_log(entries)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Sentences dropped at encoding time for exceeding max_len.
    pub dropped_long: usize,
    /// Empty intermediate decodes in back-translation steps.
    pub bt_skipped: usize,
    /// Empty intermediate decodes in cross-translation steps.
    pub ct_skipped: usize,
    /// Sentences too short to mask during pretraining.
    pub mlm_skipped: usize,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub translator: Translator,
    /// The supervised half of a cascaded run.
    pub sup_translator: Option<Translator>,
    pub log: Vec<LogEntry>,
    /// Gradient updates attributed to each loss kind (mlm/mt/ae/bt/ct).
    pub term_counts: BTreeMap<String, usize>,
    pub diagnostics: Diagnostics,
}

/// Deterministic cycling cursor over a corpus, shuffled once from its
/// own labeled stream.
struct Cursor {
    order: Vec<usize>,
    pos: usize,
}

impl Cursor {
    fn new(n: usize, seed: u64, label: &str) -> Cursor {
        let mut rng = stream(seed, label);
        let mut order: Vec<usize> = (0..n).collect();
        use rand::Rng;
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        Cursor { order, pos: 0 }
    }

    fn take(&mut self, k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k.min(self.order.len()));
        for _ in 0..k.min(self.order.len()) {
            out.push(self.order[self.pos]);
            self.pos = (self.pos + 1) % self.order.len();
        }
        out
    }
}

/// Encodes word sentences to subword ids, dropping those that exceed the
/// model length budget (a sentence must fit as source and as target).
fn encode_sentences(
    sentences: &[Vec<String>],
    bpe: &BpeModel,
    vocab: &Vocab,
    max_len: usize,
    dropped: &mut usize,
) -> Vec<Vec<usize>> {
    sentences
        .iter()
        .filter_map(|s| {
            let ids = vocab.encode(&apply_bpe(s, bpe));
            if ids.is_empty() || ids.len() > max_len - 1 {
                *dropped += 1;
                None
            } else {
                Some(ids)
            }
        })
        .collect()
}

struct EncodedMono {
    lang: LangId,
    sentences: Vec<Vec<usize>>,
}

struct EncodedParallel {
    src_lang: LangId,
    tgt_lang: LangId,
    pairs: Vec<(Vec<usize>, Vec<usize>)>,
}

/// Runs a schedule on bound corpora. The primary model's full pipeline:
/// joint subword learning over every bound corpus, optional masked-LM
/// pretraining on the monolingual data, then the architecture's loss
/// cycle, logging one line per update and validation scores every
/// `validate_every` steps.
pub fn train(schedule: &TrainSchedule, data: &DataBindings) -> Result<TrainOutcome> {
    schedule.validate()?;
    let resolved = resolve_bindings(schedule, data)?;
    let mut diagnostics = Diagnostics::default();

    // --- joint subword model over all training text
    let mut learning: Vec<&[Vec<String>]> = Vec::new();
    for m in resolved.mono.values() {
        learning.push(&m.sentences);
    }
    let mut parallel_sides: Vec<Vec<Vec<String>>> = Vec::new();
    for p in resolved
        .aux_parallel
        .values()
        .chain(resolved.focal_parallel.iter())
    {
        parallel_sides.push(p.pairs.iter().map(|(s, _)| s.clone()).collect());
        parallel_sides.push(p.pairs.iter().map(|(_, t)| t.clone()).collect());
    }
    for side in &parallel_sides {
        learning.push(side);
    }
    let bpe = learn_bpe(&learning, schedule.bpe_merges)?;
    let vocab = Vocab::from_symbols(bpe.symbol_inventory())?;

    // --- encode corpora
    let max_len = schedule.model.max_len;
    let mono: Vec<EncodedMono> = resolved
        .mono
        .values()
        .map(|m| EncodedMono {
            lang: m.lang.clone(),
            sentences: encode_sentences(
                &m.sentences,
                &bpe,
                &vocab,
                max_len,
                &mut diagnostics.dropped_long,
            ),
        })
        .collect();
    let encode_parallel = |p: &ParallelCorpus, dropped: &mut usize| -> EncodedParallel {
        let pairs = p
            .pairs
            .iter()
            .filter_map(|(s, t)| {
                let si = vocab.encode(&apply_bpe(s, &bpe));
                let ti = vocab.encode(&apply_bpe(t, &bpe));
                if si.is_empty() || ti.is_empty() || si.len() > max_len - 1 || ti.len() > max_len - 1
                {
                    *dropped += 1;
                    None
                } else {
                    Some((si, ti))
                }
            })
            .collect();
        EncodedParallel {
            src_lang: p.src_lang.clone(),
            tgt_lang: p.tgt_lang.clone(),
            pairs,
        }
    };
    let mut parallel: BTreeMap<String, EncodedParallel> = BTreeMap::new();
    for (key, p) in &resolved.aux_parallel {
        parallel.insert(key.clone(), encode_parallel(p, &mut diagnostics.dropped_long));
    }
    if let Some(p) = resolved.focal_parallel {
        parallel.insert("focal".into(), encode_parallel(p, &mut diagnostics.dropped_long));
    }
    for (key, p) in &parallel {
        if p.pairs.is_empty() {
            return Err(Error::Schedule(format!(
                "parallel corpus {key} has no usable pairs after length filtering"
            )));
        }
    }
    for m in &mono {
        if m.sentences.is_empty() {
            return Err(Error::Schedule(format!(
                "monolingual corpus {} has no usable sentences after length filtering",
                m.lang
            )));
        }
    }

    // --- models
    let langs = schedule.model_langs();
    let config = schedule.model.to_config(vocab.len(), schedule.seed);
    let mut model = init_model(&config, &langs)?;
    let mut sup_model = if schedule.architecture == Architecture::Cascaded {
        let params = schedule.sup_model.unwrap_or(schedule.model);
        let sup_langs = vec![schedule.focal_x(), LangId::new(&schedule.references[0])];
        Some(init_model(
            &params.to_config(vocab.len(), schedule.seed.wrapping_add(1)),
            &sup_langs,
        )?)
    } else {
        None
    };

    let mut log: Vec<LogEntry> = Vec::new();
    let mut term_counts: BTreeMap<String, usize> = BTreeMap::new();
    let lr = schedule.model.learning_rate;

    // --- masked-LM pretraining on monolingual data
    if schedule.mlm.enabled && schedule.mlm.steps > 0 && !mono.is_empty() {
        let mut rng = stream(schedule.seed, "mlm");
        let mut cursors: Vec<Cursor> = mono
            .iter()
            .map(|m| Cursor::new(m.sentences.len(), schedule.seed, &format!("mlm.{}", m.lang)))
            .collect();
        for step in 1..=schedule.mlm.steps {
            let mi = (step - 1) % mono.len();
            let m = &mono[mi];
            let idx = cursors[mi].take(schedule.batch_size);
            let batch: Vec<Vec<usize>> = idx.iter().map(|&i| m.sentences[i].clone()).collect();
            let out = mlm_step(&model, &batch, &m.lang, schedule.mlm.mask_rate, &mut rng)?;
            diagnostics.mlm_skipped += out.skipped_sentences;
            if out.masked_positions > 0 {
                grad_step(&mut model, &out.grads, lr)?;
            }
            log.push(LogEntry {
                step,
                term: "mlm".into(),
                value: out.loss,
            });
            *term_counts.entry("mlm".into()).or_insert(0) += 1;
        }
    }

    // --- supervised half of the cascade (its own plan: focal-free)
    if let Some(sup) = sup_model.as_mut() {
        let r = &schedule.references[0];
        let p = &parallel[r];
        let mut cursor = Cursor::new(p.pairs.len(), schedule.seed, &format!("sup.mt.{r}"));
        for step in 1..=schedule.steps {
            let idx = cursor.take(schedule.batch_size);
            let flip = step % 2 == 0;
            let batch = parallel_batch(p, &idx, flip);
            let loss = mt_step(sup, &batch, lr * schedule.loss_weights.mt)?;
            log.push(LogEntry {
                step,
                term: "mt.sup".into(),
                value: loss,
            });
            *term_counts.entry("mt".into()).or_insert(0) += 1;
        }
    }

    // --- main loss cycle
    let plan = build_plan(schedule);
    if plan.is_empty() {
        return Err(Error::Schedule(
            "every loss term has weight zero; nothing to train".into(),
        ));
    }
    let mut cursors: BTreeMap<String, Cursor> = BTreeMap::new();
    for term in &plan {
        let label = term.label();
        let n = match term {
            Term::Mt { key, .. } | Term::Ct { key, .. } => parallel[key].pairs.len(),
            Term::Ae { lang } => mono_for(&mono, lang)?.sentences.len(),
            Term::Bt { src, .. } => mono_for(&mono, src)?.sentences.len(),
        };
        cursors.insert(label.clone(), Cursor::new(n, schedule.seed, &label));
    }
    let mut noise_rng = stream(schedule.seed, "noise");
    let weights = schedule.loss_weights;

    let val_encoded: Option<(Vec<Vec<usize>>, Vec<Vec<String>>, LangId, LangId)> =
        data.validation.as_ref().map(|v| {
            let n = v.pairs.len().min(schedule.val_pairs);
            let mut dropped = 0;
            let srcs: Vec<Vec<usize>> = v.pairs[..n]
                .iter()
                .map(|(s, _)| {
                    let mut ids = vocab.encode(&apply_bpe(s, &bpe));
                    ids.truncate(max_len);
                    if ids.is_empty() {
                        dropped += 1;
                    }
                    ids
                })
                .collect();
            let refs: Vec<Vec<String>> = v.pairs[..n].iter().map(|(_, t)| t.clone()).collect();
            let _ = dropped;
            (srcs, refs, v.src_lang.clone(), v.tgt_lang.clone())
        });

    for step in 1..=schedule.steps {
        let term = &plan[(step - 1) % plan.len()];
        let label = term.label();
        let idx = cursors.get_mut(&label).unwrap().take(schedule.batch_size);
        let value = match term {
            Term::Mt { key, flip } => {
                let batch = parallel_batch(&parallel[key], &idx, *flip);
                mt_step(&mut model, &batch, lr * weights.mt)?
            }
            Term::Ae { lang } => {
                let m = mono_for(&mono, lang)?;
                let sents: Vec<Vec<usize>> =
                    idx.iter().map(|&i| m.sentences[i].clone()).collect();
                ae_step(&mut model, &sents, lang, &schedule.noise, lr * weights.ae, &mut noise_rng)?
            }
            Term::Bt { src, tgt } => {
                let m = mono_for(&mono, src)?;
                let sents: Vec<Vec<usize>> =
                    idx.iter().map(|&i| m.sentences[i].clone()).collect();
                let out = bt_step(&mut model, &sents, src, tgt, lr * weights.bt)?;
                diagnostics.bt_skipped += out.skipped;
                out.loss
            }
            Term::Ct { key, flip, pivot } => {
                let p = &parallel[key];
                let pairs: Vec<(Vec<usize>, Vec<usize>)> = idx
                    .iter()
                    .map(|&i| {
                        let (s, t) = &p.pairs[i];
                        if *flip {
                            (t.clone(), s.clone())
                        } else {
                            (s.clone(), t.clone())
                        }
                    })
                    .collect();
                let (src_lang, tgt_lang) = if *flip {
                    (&p.tgt_lang, &p.src_lang)
                } else {
                    (&p.src_lang, &p.tgt_lang)
                };
                let out = ct_step(&mut model, &pairs, src_lang, pivot, tgt_lang, lr * weights.ct)?;
                diagnostics.ct_skipped += out.skipped;
                out.loss
            }
        };
        log.push(LogEntry {
            step,
            term: label,
            value,
        });
        *term_counts.entry(term.kind().into()).or_insert(0) += 1;

        if schedule.validate_every > 0 && step % schedule.validate_every == 0 {
            if let Some((srcs, refs, src_lang, tgt_lang)) = &val_encoded {
                let score = validation_bleu(
                    &model, &vocab, &bpe, srcs, refs, src_lang, tgt_lang,
                )?;
                log.push(LogEntry {
                    step,
                    term: "val_bleu".into(),
                    value: score,
                });
            }
        }
    }

    let translator = Translator { model, vocab: vocab.clone(), bpe: bpe.clone() };
    let sup_translator = sup_model.map(|model| Translator {
        model,
        vocab,
        bpe,
    });
    Ok(TrainOutcome {
        translator,
        sup_translator,
        log,
        term_counts,
        diagnostics,
    })
}

fn mono_for<'a>(mono: &'a [EncodedMono], lang: &LangId) -> Result<&'a EncodedMono> {
    mono.iter()
        .find(|m| &m.lang == lang)
        .ok_or_else(|| Error::Schedule(format!("no monolingual corpus for {lang}")))
}

fn parallel_batch(p: &EncodedParallel, idx: &[usize], flip: bool) -> Batch {
    let (mut src, mut tgt) = (Vec::new(), Vec::new());
    for &i in idx {
        let (s, t) = &p.pairs[i];
        if flip {
            src.push(t.clone());
            tgt.push(s.clone());
        } else {
            src.push(s.clone());
            tgt.push(t.clone());
        }
    }
    if flip {
        Batch {
            src_lang: p.tgt_lang.clone(),
            tgt_lang: p.src_lang.clone(),
            src,
            tgt,
        }
    } else {
        Batch {
            src_lang: p.src_lang.clone(),
            tgt_lang: p.tgt_lang.clone(),
            src,
            tgt,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn validation_bleu(
    model: &Seq2SeqModel,
    vocab: &Vocab,
    bpe: &BpeModel,
    srcs: &[Vec<usize>],
    refs: &[Vec<String>],
    src_lang: &LangId,
    tgt_lang: &LangId,
) -> Result<f64> {
    let mut hyps = Vec::with_capacity(srcs.len());
    for ids in srcs {
        if ids.is_empty() {
            hyps.push(Vec::new());
            continue;
        }
        let out = greedy_decode(model, ids, src_lang, tgt_lang, model.config.max_len - 1)?;
        hyps.push(revert_bpe(&vocab.decode(&out), bpe));
    }
    metrics::bleu(&hyps, refs)
}
