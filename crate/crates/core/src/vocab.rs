//! Symbol table mapping subword strings to dense ids.
//!
//! Ids 0–4 are reserved control symbols shared by every model: padding,
//! begin/end of sequence, the mask token used for masked-LM pretraining,
//! and an unknown-symbol fallback. Real symbols follow in sorted order, so
//! a vocabulary built from the same symbol set is always identical.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const EOS_ID: usize = 2;
pub const MASK_ID: usize = 3;
pub const UNK_ID: usize = 4;
pub const NUM_RESERVED: usize = 5;

pub const RESERVED: [&str; NUM_RESERVED] = ["<pad>", "<s>", "</s>", "<mask>", "<unk>"];

/// Bidirectional symbol ⇄ id table with fixed reserved slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from a symbol set. Symbols are deduplicated and
    /// sorted, so construction is order-independent. Symbols colliding with
    /// a reserved name are rejected.
    pub fn from_symbols<I, S>(symbols: I) -> Result<Vocab>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = symbols.into_iter().map(Into::into).collect();
        let mut list: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        for s in set {
            if s.is_empty() {
                return Err(Error::Subword("empty symbol in vocabulary".into()));
            }
            if RESERVED.contains(&s.as_str()) {
                return Err(Error::Subword(format!(
                    "symbol {s:?} collides with a reserved control symbol"
                )));
            }
            list.push(s);
        }
        let index = list
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Vocab {
            symbols: list,
            index,
        })
    }

    /// Reconstructs a vocabulary from a full symbol list (reserved symbols
    /// included), as stored in checkpoints. The list must start with the
    /// reserved block in canonical order.
    pub fn from_full_list(list: Vec<String>) -> Result<Vocab> {
        if list.len() < NUM_RESERVED
            || list[..NUM_RESERVED] != RESERVED.map(str::to_string)[..]
        {
            return Err(Error::Subword(
                "vocabulary list does not start with the reserved control symbols".into(),
            ));
        }
        let index: HashMap<String, usize> = list
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        if index.len() != list.len() {
            return Err(Error::Subword("duplicate symbol in vocabulary".into()));
        }
        Ok(Vocab {
            symbols: list,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the reserved block is always present
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    /// Id of a symbol, falling back to the unknown id.
    pub fn id_or_unk(&self, symbol: &str) -> usize {
        self.id(symbol).unwrap_or(UNK_ID)
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Encodes a segmented sentence (no bos/eos added).
    pub fn encode(&self, symbols: &[String]) -> Vec<usize> {
        symbols.iter().map(|s| self.id_or_unk(s)).collect()
    }

    /// Decodes ids back to symbols, skipping control ids.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .filter(|&&id| id >= NUM_RESERVED)
            .filter_map(|&id| self.symbol(id).map(str::to_string))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for s in &self.symbols {
            let _ = writeln!(text, "{s}");
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Vocab> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocab::from_full_list(text.lines().map(str::to_string).collect())
    }
}
