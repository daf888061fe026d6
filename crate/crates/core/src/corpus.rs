//! Corpus loading and the shared rule-based tokenizer.
//!
//! One tokenizer serves every language in the pipeline: whitespace split,
//! then leading/trailing punctuation peeled off into separate tokens.
//! Keeping it language-independent means monolingual and parallel corpora
//! in any script go through the same preprocessing.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Punctuation that the tokenizer separates and that romanization leaves
/// untouched in Latin text.
pub const PUNCTUATION: [char; 11] = ['.', ',', ';', ':', '?', '!', '\'', '"', '(', ')', '-'];

pub fn is_punctuation(c: char) -> bool {
    PUNCTUATION.contains(&c)
}

/// Language identifier; compared and hashed by name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LangId(String);

impl LangId {
    pub fn new(name: impl Into<String>) -> Self {
        LangId(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LangId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LangId {
    fn from(s: &str) -> Self {
        LangId::new(s)
    }
}

/// Monolingual corpus: tokenized sentences in one language.
#[derive(Debug, Clone, PartialEq)]
pub struct MonoCorpus {
    pub lang: LangId,
    pub sentences: Vec<Vec<String>>,
}

impl MonoCorpus {
    pub fn new(lang: LangId, sentences: Vec<Vec<String>>) -> Self {
        MonoCorpus { lang, sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Sentence-aligned parallel corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelCorpus {
    pub src_lang: LangId,
    pub tgt_lang: LangId,
    pub pairs: Vec<(Vec<String>, Vec<String>)>,
}

impl ParallelCorpus {
    pub fn new(src_lang: LangId, tgt_lang: LangId, pairs: Vec<(Vec<String>, Vec<String>)>) -> Self {
        ParallelCorpus {
            src_lang,
            tgt_lang,
            pairs,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Same pairs with source and target sides exchanged.
    pub fn flipped(&self) -> ParallelCorpus {
        ParallelCorpus {
            src_lang: self.tgt_lang.clone(),
            tgt_lang: self.src_lang.clone(),
            pairs: self
                .pairs
                .iter()
                .map(|(s, t)| (t.clone(), s.clone()))
                .collect(),
        }
    }
}

/// Splits a line on whitespace, then peels leading and trailing punctuation
/// off each chunk into tokens of their own. Internal punctuation (hyphens in
/// "well-known", apostrophes in "don't") stays attached.
pub fn tokenize(line: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in line.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && is_punctuation(chars[start]) {
            start += 1;
        }
        while end > start && is_punctuation(chars[end - 1]) {
            end -= 1;
        }
        for &c in &chars[..start] {
            tokens.push(c.to_string());
        }
        if start < end {
            tokens.push(chars[start..end].iter().collect());
        }
        for &c in &chars[end..] {
            tokens.push(c.to_string());
        }
    }
    tokens
}

/// Joins tokens with single spaces; single-character punctuation tokens
/// attach to the preceding token without a space.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    for tok in tokens {
        let is_punct_tok = tok.chars().count() == 1 && tok.chars().all(is_punctuation);
        if out.is_empty() || is_punct_tok {
            out.push_str(tok);
        } else {
            out.push(' ');
            out.push_str(tok);
        }
    }
    out
}

/// Reads a monolingual corpus: one sentence per line, empty lines skipped.
pub fn load_mono(path: impl AsRef<Path>, lang: LangId) -> Result<MonoCorpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sentences = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(tokenize)
        .collect();
    Ok(MonoCorpus::new(lang, sentences))
}

/// Reads an aligned pair of files, one sentence per line. Line counts must
/// match exactly; empty lines are kept in the count (they align positions)
/// but pairs where either side is empty are dropped after alignment.
pub fn load_parallel(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
    src_lang: LangId,
    tgt_lang: LangId,
) -> Result<ParallelCorpus> {
    let src_path = src_path.as_ref();
    let tgt_path = tgt_path.as_ref();
    let src_text = fs::read_to_string(src_path).map_err(|e| Error::io(src_path, e))?;
    let tgt_text = fs::read_to_string(tgt_path).map_err(|e| Error::io(tgt_path, e))?;
    let src_lines: Vec<&str> = src_text.lines().collect();
    let tgt_lines: Vec<&str> = tgt_text.lines().collect();
    if src_lines.len() != tgt_lines.len() {
        return Err(Error::LineCountMismatch {
            src_path: src_path.to_path_buf(),
            tgt_path: tgt_path.to_path_buf(),
            src_lines: src_lines.len(),
            tgt_lines: tgt_lines.len(),
        });
    }
    let pairs = src_lines
        .iter()
        .zip(&tgt_lines)
        .filter(|(s, t)| !s.trim().is_empty() && !t.trim().is_empty())
        .map(|(s, t)| (tokenize(s), tokenize(t)))
        .collect();
    Ok(ParallelCorpus::new(src_lang, tgt_lang, pairs))
}

/// Reads a parallel corpus from a single TSV file: source sentence, one tab,
/// target sentence. Lines with zero or more than one tab are an error.
pub fn load_parallel_tsv(
    path: impl AsRef<Path>,
    src_lang: LangId,
    tgt_lang: LangId,
) -> Result<ParallelCorpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let tabs = line.matches('\t').count();
        if tabs != 1 {
            return Err(Error::TsvShape {
                path: path.to_path_buf(),
                line: i + 1,
                tabs,
            });
        }
        let (src, tgt) = line.split_once('\t').unwrap();
        if src.trim().is_empty() || tgt.trim().is_empty() {
            continue;
        }
        pairs.push((tokenize(src), tokenize(tgt)));
    }
    Ok(ParallelCorpus::new(src_lang, tgt_lang, pairs))
}

/// Writes one detokenized sentence per line.
pub fn write_sentences(path: impl AsRef<Path>, sentences: &[Vec<String>]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for s in sentences {
        out.push_str(&detokenize(s));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a parallel corpus as TSV: source sentence, one tab, target
/// sentence per line (the format `load_parallel_tsv` reads back).
pub fn write_parallel_tsv(path: impl AsRef<Path>, corpus: &ParallelCorpus) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (s, t) in &corpus.pairs {
        out.push_str(&detokenize(s));
        out.push('\t');
        out.push_str(&detokenize(t));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
