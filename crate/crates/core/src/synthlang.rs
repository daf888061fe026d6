//! Synthetic language families with controllable relatedness.
//!
//! A family starts from a base language: a seeded random lexicon over a
//! small character inventory plus a seeded Markov chain over words. Every
//! sentence is first drawn in an abstract form (a sequence of lexicon
//! indices) and only then rendered in a concrete language, so the same
//! text can be produced in any member of the family — that is what makes
//! ground-truth translations and cross-lingual corpora derivable.
//!
//! Derived languages come in two flavors:
//!
//! * related — a bijective relexification of a chosen fraction of the
//!   lexicon (the rest stays shared), optionally re-rendered in a
//!   disjoint character inventory ("a different script"). Substituted
//!   words are nested across strengths: strength 0.6 replaces a superset
//!   of what 0.3 replaces, so lexical overlap is monotone by construction.
//! * distant — a fully disjoint lexicon, a disjoint script, and reversed
//!   word order.
//!
//! All lexicons are stored in the base inventory ("abstract spelling");
//! a language with its own script renders text through a character
//! bijection. The inverse of that bijection, emitted as a scheme table,
//! plays the role transliteration plays for real languages: applying it
//! puts two related languages back into one script.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LangId, MonoCorpus, ParallelCorpus, PUNCTUATION};
use crate::error::{Error, Result};
use crate::seeding::stream;

// --------------------------------------------------------------------- spec

/// Parameters of a synthetic family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Number of words in each language's lexicon.
    pub vocab_size: usize,
    /// Sentence length range, inclusive.
    pub min_sentence_len: usize,
    pub max_sentence_len: usize,
    /// Sentences in each monolingual corpus.
    pub corpus_size: usize,
    /// Held-out ground-truth pairs per derived language.
    #[serde(default = "default_test_pairs")]
    pub test_pairs: usize,
    /// Markov order of the word chain: 0 (independent draws) or 1.
    #[serde(default = "default_markov_order")]
    pub markov_order: usize,
    /// Character inventory of the base script.
    pub base_inventory: String,
    pub seed: u64,
}

fn default_test_pairs() -> usize {
    500
}

fn default_markov_order() -> usize {
    1
}

impl SynthSpec {
    /// A desk-scale family: small lexicon, short sentences, corpora that
    /// train in minutes.
    pub fn desk_default(seed: u64) -> SynthSpec {
        SynthSpec {
            vocab_size: 40,
            min_sentence_len: 3,
            max_sentence_len: 8,
            corpus_size: 2000,
            test_pairs: 500,
            markov_order: 1,
            base_inventory: "aeiklmnorstu".into(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Synth("vocab_size must be at least 2".into()));
        }
        if self.min_sentence_len < 1 || self.min_sentence_len > self.max_sentence_len {
            return Err(Error::Synth(format!(
                "invalid sentence length range {}..={}",
                self.min_sentence_len, self.max_sentence_len
            )));
        }
        if self.corpus_size < 1 {
            return Err(Error::Synth("corpus_size must be at least 1".into()));
        }
        if self.markov_order > 1 {
            return Err(Error::Synth(format!(
                "markov_order {} not supported (use 0 or 1)",
                self.markov_order
            )));
        }
        validate_inventory(&self.base_inventory)?;
        Ok(())
    }
}

fn validate_inventory(inv: &str) -> Result<Vec<char>> {
    let chars: Vec<char> = inv.chars().collect();
    let set: BTreeSet<char> = chars.iter().copied().collect();
    if set.len() != chars.len() {
        return Err(Error::Synth(format!(
            "inventory {inv:?} repeats a character"
        )));
    }
    if chars.len() < 4 {
        return Err(Error::Synth(format!(
            "inventory {inv:?} is too small (need at least 4 characters)"
        )));
    }
    for &c in &chars {
        if c.is_whitespace() || c.is_ascii_digit() || PUNCTUATION.contains(&c) {
            return Err(Error::Synth(format!(
                "inventory character {c:?} collides with whitespace, digits, or punctuation"
            )));
        }
    }
    Ok(chars)
}

/// Named stock inventories, pairwise disjoint.
pub fn stock_inventory(name: &str) -> Result<String> {
    match name {
        "latin" => Ok("aeiklmnorstu".into()),
        "greek" => Ok("αβγδεζηθικλμ".into()),
        "cyrillic" => Ok("бвгджзилнптш".into()),
        "runic" => Ok("ᚠᚢᚦᚨᚱᚲᚷᚹᚺᚾᛁᛃ".into()),
        other => Err(Error::Synth(format!("unknown stock inventory {other:?}"))),
    }
}

// ------------------------------------------------------------------- family

/// One member of a family. Lexicons are spelled in the base inventory;
/// `script_map` re-renders characters when the language has its own script.
#[derive(Debug, Clone)]
pub struct SynthLanguage {
    pub lang: LangId,
    /// word index → abstract spelling (base inventory).
    lexicon: Vec<String>,
    /// base char → script char, when the language uses its own script.
    script_map: Option<HashMap<char, char>>,
    pub inventory: Vec<char>,
    pub reversed: bool,
    /// Relexification strength used to derive this language (base: 0).
    pub strength: f64,
}

/// A base language plus everything derived from it. Keeps the abstract
/// sentence stream, so any sentence can be rendered in any member.
#[derive(Debug, Clone)]
pub struct SynthFamily {
    pub spec: SynthSpec,
    base_chars: Vec<char>,
    languages: Vec<SynthLanguage>,
    /// Shared abstract sentences behind every monolingual corpus.
    sentences: Vec<Vec<usize>>,
    /// Shared abstract sentences behind every ground-truth test set.
    test_sentences: Vec<Vec<usize>>,
    /// Cumulative initial-word distribution.
    init_cdf: Vec<f64>,
    /// Cumulative next-word distribution per previous word (order 1).
    trans_cdf: Vec<Vec<f64>>,
    /// Fixed substitution order; a strength-s relexification replaces
    /// the first ⌊s·vocab⌋ entries, so substituted sets nest.
    subst_order: Vec<usize>,
}

fn draw_word(rng: &mut ChaCha8Rng, inventory: &[char]) -> String {
    let len = rng.gen_range(3..=6);
    (0..len)
        .map(|_| inventory[rng.gen_range(0..inventory.len())])
        .collect()
}

fn draw_lexicon(
    rng: &mut ChaCha8Rng,
    inventory: &[char],
    count: usize,
    taken: &BTreeSet<String>,
) -> Result<Vec<String>> {
    let mut words = Vec::with_capacity(count);
    let mut seen = taken.clone();
    let mut attempts = 0usize;
    while words.len() < count {
        attempts += 1;
        if attempts > 200 * count {
            return Err(Error::Synth(format!(
                "inventory of {} characters is too small to draw {count} distinct words",
                inventory.len()
            )));
        }
        let w = draw_word(rng, inventory);
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    Ok(words)
}

fn cdf_from_weights(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}

fn sample_cdf(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    match cdf.binary_search_by(|p| p.partial_cmp(&u).unwrap()) {
        Ok(i) => (i + 1).min(cdf.len() - 1),
        Err(i) => i.min(cdf.len() - 1),
    }
}

/// Builds the base language and draws its monolingual corpus.
pub fn gen_base(spec: &SynthSpec, lang: &str) -> Result<(MonoCorpus, SynthFamily)> {
    spec.validate()?;
    let base_chars = validate_inventory(&spec.base_inventory)?;
    let v = spec.vocab_size;

    let mut rng = stream(spec.seed, "lexicon.base");
    let lexicon = draw_lexicon(&mut rng, &base_chars, v, &BTreeSet::new())?;

    // Zipf-flavored unigram weights over word ranks, plus (for order 1)
    // per-context multiplicative jitter so the chain has real structure.
    let mut rng = stream(spec.seed, "chain");
    let unigram: Vec<f64> = (0..v).map(|i| 1.0 / (i as f64 + 2.0).powf(0.7)).collect();
    let init_cdf = cdf_from_weights(&unigram);
    let trans_cdf = if spec.markov_order == 1 {
        (0..v)
            .map(|_| {
                let weights: Vec<f64> = unigram
                    .iter()
                    .map(|u| u * (2.0 * rng.gen::<f64>()).exp())
                    .collect();
                cdf_from_weights(&weights)
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut rng = stream(spec.seed, "subst");
    let mut subst_order: Vec<usize> = (0..v).collect();
    for i in (1..v).rev() {
        let j = rng.gen_range(0..=i);
        subst_order.swap(i, j);
    }

    let mut family = SynthFamily {
        spec: spec.clone(),
        base_chars,
        languages: vec![SynthLanguage {
            lang: LangId::new(lang),
            lexicon,
            script_map: None,
            inventory: spec.base_inventory.chars().collect(),
            reversed: false,
            strength: 0.0,
        }],
        sentences: Vec::new(),
        test_sentences: Vec::new(),
        init_cdf,
        trans_cdf,
        subst_order,
    };
    family.sentences = family.draw_sentences(spec.corpus_size, "sentences");
    family.test_sentences = family.draw_sentences(spec.test_pairs, "test");
    let mono = family.mono(&LangId::new(lang))?;
    Ok((mono, family))
}

impl SynthFamily {
    fn draw_sentences(&self, count: usize, label: &str) -> Vec<Vec<usize>> {
        let mut rng = stream(self.spec.seed, label);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let len = rng.gen_range(self.spec.min_sentence_len..=self.spec.max_sentence_len);
            let mut sent: Vec<usize> = Vec::with_capacity(len);
            for t in 0..len {
                let idx = if t == 0 || self.spec.markov_order == 0 {
                    sample_cdf(&self.init_cdf, &mut rng)
                } else {
                    sample_cdf(&self.trans_cdf[*sent.last().unwrap()], &mut rng)
                };
                sent.push(idx);
            }
            out.push(sent);
        }
        out
    }

    pub fn base(&self) -> &SynthLanguage {
        &self.languages[0]
    }

    pub fn languages(&self) -> &[SynthLanguage] {
        &self.languages
    }

    pub fn language(&self, lang: &LangId) -> Result<&SynthLanguage> {
        self.languages
            .iter()
            .find(|l| &l.lang == lang)
            .ok_or_else(|| Error::Synth(format!("unknown synthetic language {lang}")))
    }

    /// Renders an abstract sentence in a member language.
    pub fn render(&self, sentence: &[usize], lang: &LangId) -> Result<Vec<String>> {
        let language = self.language(lang)?;
        let mut words: Vec<String> = sentence
            .iter()
            .map(|&idx| {
                let w = &language.lexicon[idx];
                match &language.script_map {
                    None => w.clone(),
                    Some(map) => w.chars().map(|c| map[&c]).collect(),
                }
            })
            .collect();
        if language.reversed {
            words.reverse();
        }
        Ok(words)
    }

    /// The monolingual corpus of a member: the family's shared sentence
    /// stream rendered in that language.
    pub fn mono(&self, lang: &LangId) -> Result<MonoCorpus> {
        let sentences = self
            .sentences
            .iter()
            .map(|s| self.render(s, lang))
            .collect::<Result<Vec<_>>>()?;
        Ok(MonoCorpus {
            lang: lang.clone(),
            sentences,
        })
    }

    /// Held-out ground-truth pairs between two members (the same abstract
    /// test sentences for every pair, so conditions stay comparable).
    pub fn test_pairs(&self, src: &LangId, tgt: &LangId) -> Result<ParallelCorpus> {
        let pairs = self
            .test_sentences
            .iter()
            .map(|s| Ok((self.render(s, src)?, self.render(s, tgt)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ParallelCorpus {
            src_lang: src.clone(),
            tgt_lang: tgt.clone(),
            pairs,
        })
    }

    /// A fresh parallel corpus between two members (training-grade, drawn
    /// from its own stream, disjoint from mono and test streams by
    /// construction of the labels).
    pub fn parallel(&self, src: &LangId, tgt: &LangId, count: usize, salt: u64) -> Result<ParallelCorpus> {
        self.language(src)?;
        self.language(tgt)?;
        let sentences = self.draw_sentences(count, &format!("parallel.{salt}"));
        let pairs = sentences
            .iter()
            .map(|s| Ok((self.render(s, src)?, self.render(s, tgt)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ParallelCorpus {
            src_lang: src.clone(),
            tgt_lang: tgt.clone(),
            pairs,
        })
    }

    fn check_new_language(&self, name: &str) -> Result<()> {
        if self.languages.iter().any(|l| l.lang.name() == name) {
            return Err(Error::Synth(format!(
                "language {name:?} already exists in this family"
            )));
        }
        Ok(())
    }

    /// Validates a script inventory for a derived language: `None` means
    /// the base script; `Some` must be disjoint from every inventory
    /// already in use and at least as large as the base inventory.
    fn script_map_for(&self, inventory: Option<&str>) -> Result<(Option<HashMap<char, char>>, Vec<char>)> {
        match inventory {
            None => Ok((None, self.base_chars.clone())),
            Some(inv) => {
                let chars = validate_inventory(inv)?;
                if chars.len() < self.base_chars.len() {
                    return Err(Error::Synth(format!(
                        "script inventory has {} characters but the base script has {}",
                        chars.len(),
                        self.base_chars.len()
                    )));
                }
                for l in &self.languages {
                    if l.inventory.iter().any(|c| chars.contains(c)) {
                        return Err(Error::Synth(format!(
                            "script inventory overlaps the one used by {}",
                            l.lang
                        )));
                    }
                }
                let map: HashMap<char, char> = self
                    .base_chars
                    .iter()
                    .copied()
                    .zip(chars.iter().copied())
                    .collect();
                Ok((Some(map), chars))
            }
        }
    }

    /// Derives a related language: the first ⌊strength·vocab⌋ words of the
    /// fixed substitution order are relexified bijectively, the rest stay
    /// shared with the base. Returns its monolingual corpus and the
    /// held-out ground-truth pairs (base → derived), which are meant for
    /// evaluation only.
    pub fn derive_related(
        &mut self,
        name: &str,
        strength: f64,
        inventory: Option<&str>,
    ) -> Result<(MonoCorpus, ParallelCorpus)> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::Synth(format!(
                "substitution strength must lie in [0, 1], got {strength}"
            )));
        }
        self.check_new_language(name)?;
        let (script_map, inventory_chars) = self.script_map_for(inventory)?;
        let n_subst = (strength * self.spec.vocab_size as f64).floor() as usize;
        let taken: BTreeSet<String> = self.base().lexicon.iter().cloned().collect();
        let mut rng = stream(self.spec.seed, &format!("lexicon.{name}"));
        let fresh = draw_lexicon(&mut rng, &self.base_chars, n_subst, &taken)?;
        let mut lexicon = self.base().lexicon.clone();
        for (slot, word) in self.subst_order[..n_subst].iter().zip(fresh) {
            lexicon[*slot] = word;
        }
        self.languages.push(SynthLanguage {
            lang: LangId::new(name),
            lexicon,
            script_map,
            inventory: inventory_chars,
            reversed: false,
            strength,
        });
        let lang = LangId::new(name);
        Ok((
            self.mono(&lang)?,
            self.test_pairs(&self.base().lang.clone(), &lang)?,
        ))
    }

    /// Derives a distant language: fully disjoint lexicon, its own script,
    /// and reversed word order.
    pub fn derive_distant(
        &mut self,
        name: &str,
        inventory: &str,
    ) -> Result<(MonoCorpus, ParallelCorpus)> {
        self.check_new_language(name)?;
        let (script_map, inventory_chars) = self.script_map_for(Some(inventory))?;
        let taken: BTreeSet<String> = self
            .languages
            .iter()
            .flat_map(|l| l.lexicon.iter().cloned())
            .collect();
        let mut rng = stream(self.spec.seed, &format!("lexicon.{name}"));
        let lexicon = draw_lexicon(&mut rng, &self.base_chars, self.spec.vocab_size, &taken)?;
        self.languages.push(SynthLanguage {
            lang: LangId::new(name),
            lexicon,
            script_map,
            inventory: inventory_chars,
            reversed: true,
            strength: 1.0,
        });
        let lang = LangId::new(name);
        Ok((
            self.mono(&lang)?,
            self.test_pairs(&self.base().lang.clone(), &lang)?,
        ))
    }

    /// Re-renders an existing member under a different script: identical
    /// lexicon, word order, and strength — only the character inventory
    /// changes. The pair (member, reskinned member) is the tightest
    /// possible control for script-unification comparisons: the two
    /// corpora differ in rendering alone.
    pub fn reskin(&mut self, source: &LangId, name: &str, inventory: &str) -> Result<MonoCorpus> {
        self.check_new_language(name)?;
        let (lexicon, reversed, strength) = {
            let src = self.language(source)?;
            (src.lexicon.clone(), src.reversed, src.strength)
        };
        let (script_map, inventory_chars) = self.script_map_for(Some(inventory))?;
        self.languages.push(SynthLanguage {
            lang: LangId::new(name),
            lexicon,
            script_map,
            inventory: inventory_chars,
            reversed,
            strength,
        });
        self.mono(&LangId::new(name))
    }

    /// Word-level translation table base → member (the ground-truth
    /// relexification map).
    pub fn relex_map(&self, lang: &LangId) -> Result<Vec<(String, String)>> {
        let language = self.language(lang)?;
        Ok(self
            .base()
            .lexicon
            .iter()
            .zip(&language.lexicon)
            .map(|(b, w)| {
                let rendered: String = match &language.script_map {
                    None => w.clone(),
                    Some(map) => w.chars().map(|c| map[&c]).collect(),
                };
                (b.clone(), rendered)
            })
            .collect())
    }

    /// Script-unification table for a member with its own script: pairs
    /// (member char, base char). Applying it as a transliteration scheme
    /// re-renders the member's text in the base script exactly; `None`
    /// when the member already shares the base script.
    pub fn unification_pairs(&self, lang: &LangId) -> Result<Option<Vec<(String, String)>>> {
        let language = self.language(lang)?;
        Ok(language.script_map.as_ref().map(|map| {
            let mut pairs: Vec<(String, String)> = map
                .iter()
                .map(|(base, script)| (script.to_string(), base.to_string()))
                .collect();
            pairs.sort();
            pairs
        }))
    }

    /// Machine-readable description: spec, members, and ground-truth maps.
    /// Lexicons are index-aligned: word `i` of any two members are
    /// translations of each other.
    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "spec": self.spec,
            "languages": self.languages.iter().map(|l| {
                let surface: Vec<String> = l.lexicon.iter().map(|w| {
                    match &l.script_map {
                        None => w.clone(),
                        Some(map) => w.chars().map(|c| map[&c]).collect(),
                    }
                }).collect();
                serde_json::json!({
                    "lang": l.lang.name(),
                    "inventory": l.inventory.iter().collect::<String>(),
                    "own_script": l.script_map.is_some(),
                    "reversed": l.reversed,
                    "strength": l.strength,
                    "lexicon": surface,
                })
            }).collect::<Vec<_>>(),
        })
    }
}

// -------------------------------------------------------------- world plans

/// How one derived family member is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DerivePlan {
    /// Shared lexicon except for a `strength` fraction of substituted
    /// words; `inventory` (a stock script name or a literal character
    /// set) gives it its own script, omitted keeps the base script.
    Related {
        name: String,
        strength: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inventory: Option<String>,
    },
    /// Fully fresh lexicon, own script, reversed word order.
    Distant { name: String, inventory: String },
    /// An existing member re-rendered in a different script.
    Reskin {
        name: String,
        source: String,
        inventory: String,
    },
}

impl DerivePlan {
    pub fn name(&self) -> &str {
        match self {
            DerivePlan::Related { name, .. }
            | DerivePlan::Distant { name, .. }
            | DerivePlan::Reskin { name, .. } => name,
        }
    }
}

/// A training-grade parallel corpus to draw between two members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelPlan {
    pub src: String,
    pub tgt: String,
    pub count: usize,
    pub salt: u64,
}

/// A complete synthetic world: the base language, derived members,
/// training parallel corpora, and which held-out ground-truth pairs to
/// materialize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldPlan {
    pub spec: SynthSpec,
    pub base: String,
    #[serde(default)]
    pub derive: Vec<DerivePlan>,
    #[serde(default)]
    pub parallel: Vec<ParallelPlan>,
    /// Test-pair directions to emit, e.g. `["xx", "yy"]`.
    #[serde(default)]
    pub tests: Vec<[String; 2]>,
}

/// The materialized corpora of a world plan.
#[derive(Debug, Clone)]
pub struct World {
    pub family: SynthFamily,
    pub mono: Vec<MonoCorpus>,
    pub parallel: Vec<ParallelCorpus>,
    pub tests: Vec<ParallelCorpus>,
}

impl WorldPlan {
    pub fn from_json(text: &str) -> Result<WorldPlan> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Resolves an inventory field: a stock script name or a literal
    /// character set.
    fn resolve_inventory(inv: &str) -> String {
        stock_inventory(inv).unwrap_or_else(|_| inv.to_string())
    }

    /// Builds the family and draws every corpus the plan names.
    pub fn execute(&self) -> Result<World> {
        let (base_mono, mut family) = gen_base(&self.spec, &self.base)?;
        let mut mono = vec![base_mono];
        for d in &self.derive {
            match d {
                DerivePlan::Related {
                    name,
                    strength,
                    inventory,
                } => {
                    let inv = inventory.as_deref().map(Self::resolve_inventory);
                    let (m, _) = family.derive_related(name, *strength, inv.as_deref())?;
                    mono.push(m);
                }
                DerivePlan::Distant { name, inventory } => {
                    let inv = Self::resolve_inventory(inventory);
                    let (m, _) = family.derive_distant(name, &inv)?;
                    mono.push(m);
                }
                DerivePlan::Reskin {
                    name,
                    source,
                    inventory,
                } => {
                    let inv = Self::resolve_inventory(inventory);
                    mono.push(family.reskin(&LangId::new(source.as_str()), name, &inv)?);
                }
            }
        }
        let parallel = self
            .parallel
            .iter()
            .map(|p| {
                family.parallel(
                    &LangId::new(p.src.as_str()),
                    &LangId::new(p.tgt.as_str()),
                    p.count,
                    p.salt,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let tests = self
            .tests
            .iter()
            .map(|[a, b]| family.test_pairs(&LangId::new(a.as_str()), &LangId::new(b.as_str())))
            .collect::<Result<Vec<_>>>()?;
        Ok(World {
            family,
            mono,
            parallel,
            tests,
        })
    }
}
