//! Byte-pair encoding over a shared multilingual vocabulary.
//!
//! One model is learned jointly over all corpora handed in, so languages
//! that share character sequences end up sharing subword symbols — the
//! anchor that lets a single embedding table serve several languages.
//! Every input token is closed by a reserved word-boundary marker symbol,
//! which makes segmentation exactly invertible: `revert_bpe(apply_bpe(x))`
//! is `x` for any token sequence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Reserved symbol closing each word. Never merged into the middle of a
/// symbol (it only ever appears word-finally) and forbidden inside input
/// tokens.
pub const BOUNDARY_MARKER: &str = "</w>";

#[derive(Debug, Clone, PartialEq)]
pub struct BpeModel {
    /// Merge rules in the order they were learned.
    pub merges: Vec<(String, String)>,
    /// Symbols reachable by this model: initial characters, the marker and
    /// every merge output.
    pub vocab: BTreeSet<String>,
    pub marker: String,
}

/// Learns merge rules over the combined word frequencies of all corpora.
/// Each step merges the most frequent adjacent symbol pair; ties go to the
/// lexicographically smallest pair (left symbol first). Learning stops
/// early once no pair occurs at least twice.
pub fn learn_bpe(corpora: &[&[Vec<String>]], num_merges: usize) -> Result<BpeModel> {
    let mut word_freq: BTreeMap<String, u64> = BTreeMap::new();
    for corpus in corpora {
        for sentence in *corpus {
            for token in sentence {
                if token.contains(BOUNDARY_MARKER) {
                    return Err(Error::Subword(format!(
                        "token {token:?} contains the reserved marker {BOUNDARY_MARKER:?}"
                    )));
                }
                *word_freq.entry(token.clone()).or_insert(0) += 1;
            }
        }
    }
    if word_freq.is_empty() {
        return Err(Error::Subword("no tokens to learn from".into()));
    }

    let mut vocab: BTreeSet<String> = BTreeSet::new();
    vocab.insert(BOUNDARY_MARKER.to_string());
    let mut words: Vec<(Vec<String>, u64)> = word_freq
        .iter()
        .map(|(w, &count)| {
            let mut symbols: Vec<String> = w.chars().map(|c| c.to_string()).collect();
            for s in &symbols {
                vocab.insert(s.clone());
            }
            symbols.push(BOUNDARY_MARKER.to_string());
            (symbols, count)
        })
        .collect();

    let mut merges = Vec::with_capacity(num_merges);
    for _ in 0..num_merges {
        let mut pair_counts: BTreeMap<(&str, &str), u64> = BTreeMap::new();
        for (symbols, count) in &words {
            for pair in symbols.windows(2) {
                *pair_counts
                    .entry((pair[0].as_str(), pair[1].as_str()))
                    .or_insert(0) += count;
            }
        }
        // BTreeMap iterates pairs in ascending order, so a strict `>` keeps
        // the lexicographically smallest pair among equal counts.
        let mut best: Option<((&str, &str), u64)> = None;
        for (&pair, &count) in &pair_counts {
            if best.map_or(true, |(_, c)| count > c) {
                best = Some((pair, count));
            }
        }
        let Some(((left, right), count)) = best else {
            break;
        };
        if count < 2 {
            break;
        }
        let (left, right) = (left.to_string(), right.to_string());
        let joined = format!("{left}{right}");
        for (symbols, _) in &mut words {
            merge_in_place(symbols, &left, &right, &joined);
        }
        vocab.insert(joined);
        merges.push((left, right));
    }

    Ok(BpeModel {
        merges,
        vocab,
        marker: BOUNDARY_MARKER.to_string(),
    })
}

/// Replaces every adjacent (left, right) occurrence, scanning left to right
/// without overlap.
fn merge_in_place(symbols: &mut Vec<String>, left: &str, right: &str, joined: &str) {
    let mut i = 0;
    while i + 1 < symbols.len() {
        if symbols[i] == left && symbols[i + 1] == right {
            symbols[i] = joined.to_string();
            symbols.remove(i + 1);
        } else {
            i += 1;
        }
    }
}

/// Segments tokens into subword symbols. Characters never seen during
/// learning simply stay single-character symbols; the final symbol of each
/// token carries the boundary marker.
pub fn apply_bpe(tokens: &[String], model: &BpeModel) -> Vec<String> {
    let rank: HashMap<(&str, &str), usize> = model
        .merges
        .iter()
        .enumerate()
        .map(|(i, (l, r))| ((l.as_str(), r.as_str()), i))
        .collect();
    let mut out = Vec::new();
    for token in tokens {
        let mut symbols: Vec<String> = token.chars().map(|c| c.to_string()).collect();
        symbols.push(model.marker.clone());
        loop {
            let mut best: Option<(usize, usize)> = None; // (rank, position)
            for i in 0..symbols.len().saturating_sub(1) {
                if let Some(&r) = rank.get(&(symbols[i].as_str(), symbols[i + 1].as_str())) {
                    if best.map_or(true, |(br, _)| r < br) {
                        best = Some((r, i));
                    }
                }
            }
            let Some((r, _)) = best else { break };
            let (left, right) = &model.merges[r];
            let joined = format!("{left}{right}");
            merge_in_place(&mut symbols, left, right, &joined);
        }
        out.extend(symbols);
    }
    out
}

/// Exact inverse of [`apply_bpe`]: concatenates symbols and closes a token
/// at every marker.
pub fn revert_bpe(subwords: &[String], model: &BpeModel) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for sym in subwords {
        if let Some(stem) = sym.strip_suffix(&model.marker) {
            current.push_str(stem);
            tokens.push(std::mem::take(&mut current));
        } else {
            current.push_str(sym);
        }
    }
    if !current.is_empty() {
        // Only reachable on input that did not come from apply_bpe; keep the
        // residue rather than silently dropping it.
        tokens.push(current);
    }
    tokens
}

impl BpeModel {
    /// Every symbol segmentation can produce on text over the learned
    /// character set. The corpus vocabulary alone is not enough: a merge
    /// output (or an unmerged single character, or the bare marker) can be
    /// fully absorbed in the learning data yet still surface on unseen
    /// text, so merge sides, merge outputs, single characters, and the
    /// marker are all included.
    pub fn symbol_inventory(&self) -> BTreeSet<String> {
        let mut set = self.vocab.clone();
        set.insert(self.marker.clone());
        for (l, r) in &self.merges {
            set.insert(format!("{l}{r}"));
            set.insert(l.clone());
            set.insert(r.clone());
        }
        let mut chars: BTreeSet<String> = BTreeSet::new();
        for sym in &set {
            let stem = sym.strip_suffix(&self.marker).unwrap_or(sym);
            for c in stem.chars() {
                chars.insert(c.to_string());
            }
        }
        set.extend(chars);
        set
    }

    /// Text format: header `bpe v1 <marker>`, then one merge per line as
    /// `left right`. Symbols never contain spaces, so the split is safe.
    /// Renders the text format: a `bpe v1 <marker>` header line, then
    /// one merge per line as `left right`.
    pub fn to_text(&self) -> String {
        let mut out = format!("bpe v1 {}\n", self.marker);
        for (l, r) in &self.merges {
            out.push_str(l);
            out.push(' ');
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Loads the text format. The reloaded vocabulary contains the marker,
    /// the merge outputs and the characters appearing in merges; singleton
    /// characters that were never merged are not recoverable from the file.
    pub fn load(path: impl AsRef<Path>) -> Result<BpeModel> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Subword(format!("{}: empty model file", path.display())))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 3 || fields[0] != "bpe" || fields[1] != "v1" {
            return Err(Error::Subword(format!(
                "{}: bad header {header:?}, expected \"bpe v1 <marker>\"",
                path.display()
            )));
        }
        let marker = fields[2].to_string();
        let mut merges = Vec::new();
        let mut vocab: BTreeSet<String> = BTreeSet::new();
        vocab.insert(marker.clone());
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let (l, r) = line.split_once(' ').ok_or_else(|| {
                Error::Subword(format!(
                    "{}:{}: expected \"left right\"",
                    path.display(),
                    i + 2
                ))
            })?;
            vocab.insert(format!("{l}{r}"));
            for side in [l, r] {
                let stem = side.strip_suffix(&marker).unwrap_or(side);
                for c in stem.chars() {
                    vocab.insert(c.to_string());
                }
            }
            merges.push((l.to_string(), r.to_string()));
        }
        Ok(BpeModel {
            merges,
            vocab,
            marker,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sentences(words: &[&str]) -> Vec<Vec<String>> {
        vec![words.iter().map(|w| w.to_string()).collect()]
    }

    #[test]
    fn first_merge_is_most_frequent_pair() {
        // {"aaab", "aab"}: pair (a,a) occurs 3 times, (a,b) twice,
        // (b,marker) twice, so (a,a) merges first.
        let corpus = sentences(&["aaab", "aab"]);
        let model = learn_bpe(&[&corpus], 1).unwrap();
        assert_eq!(model.merges, vec![("a".to_string(), "a".to_string())]);
    }

    #[test]
    fn ties_break_lexicographically() {
        // (a,b), (b,marker), (c,d), (d,marker) all occur twice.
        let corpus = sentences(&["ab", "ab", "cd", "cd"]);
        let model = learn_bpe(&[&corpus], 1).unwrap();
        assert_eq!(model.merges, vec![("a".to_string(), "b".to_string())]);
    }

    #[test]
    fn stops_when_no_pair_repeats() {
        let corpus = sentences(&["ab"]);
        let model = learn_bpe(&[&corpus], 10).unwrap();
        assert!(model.merges.is_empty());
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let corpus: Vec<Vec<String>> = Vec::new();
        assert!(learn_bpe(&[corpus.as_slice()], 5).is_err());
    }

    #[test]
    fn marker_inside_token_is_an_error() {
        let corpus = sentences(&["bad</w>token"]);
        assert!(learn_bpe(&[&corpus], 5).is_err());
    }

    #[test]
    fn learning_is_deterministic() {
        let corpus = sentences(&["banana", "bandana", "cabana", "anagram"]);
        let a = learn_bpe(&[&corpus], 20).unwrap();
        let b = learn_bpe(&[&corpus], 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vocab_is_bounded_by_inventory_plus_merges() {
        let corpus = sentences(&["banana", "bandana", "cabana", "anagram"]);
        let model = learn_bpe(&[&corpus], 20).unwrap();
        let chars: BTreeSet<char> = "banana bandana cabana anagram"
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect();
        assert!(model.vocab.len() <= chars.len() + 1 + model.merges.len());
    }

    #[test]
    fn apply_marks_every_token_end() {
        let corpus = sentences(&["aaab", "aab"]);
        let model = learn_bpe(&[&corpus], 2).unwrap();
        let toks = vec!["aaab".to_string(), "xy".to_string()];
        let subs = apply_bpe(&toks, &model);
        let markers = subs
            .iter()
            .filter(|s| s.ends_with(&model.marker))
            .count();
        assert_eq!(markers, 2);
        // 'x' and 'y' were never seen: they stay single characters.
        assert!(subs.contains(&"x".to_string()));
    }

    #[test]
    fn symbol_inventory_covers_any_segmentation_output() {
        // "ab" is merged early and then absorbed into larger symbols in
        // the learning data, but remains reachable on unseen words; the
        // bare marker likewise.
        let corpus = sentences(&["abc", "abc", "abd", "abd"]);
        let model = learn_bpe(&[&corpus], 6).unwrap();
        let inventory = model.symbol_inventory();
        let known = |s: &str| {
            s.strip_suffix(&model.marker)
                .unwrap_or(s)
                .chars()
                .all(|c| "abcd".contains(c))
        };
        for word in ["abc", "abd", "abdc", "ab", "ba", "ca", "d"] {
            for s in apply_bpe(&[word.to_string()], &model) {
                if known(&s) {
                    assert!(inventory.contains(&s), "symbol {s:?} missing");
                }
            }
        }
        for (l, r) in &model.merges {
            assert!(inventory.contains(&format!("{l}{r}")));
        }
        assert!(inventory.contains(&model.marker));
    }

    #[test]
    fn revert_inverts_apply_on_random_sentences() {
        let corpus = sentences(&["banana", "bandana", "cabana", "anagram", "grab"]);
        let model = learn_bpe(&[&corpus], 15).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let alphabet: Vec<char> = "abcdgmnrxyz".chars().collect();
        for _ in 0..1000 {
            let n = rng.gen_range(1..10);
            let tokens: Vec<String> = (0..n)
                .map(|_| {
                    let len = rng.gen_range(1..9);
                    (0..len)
                        .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                        .collect()
                })
                .collect();
            let subs = apply_bpe(&tokens, &model);
            assert_eq!(revert_bpe(&subs, &model), tokens);
        }
    }

    #[test]
    fn joint_learning_shares_symbols_across_corpora() {
        let a = sentences(&["mana", "mane", "mani"]);
        let b = sentences(&["mano", "manu", "mana"]);
        let model = learn_bpe(&[&a, &b], 8).unwrap();
        // The shared "man" stem becomes one symbol serving both corpora.
        let seg_a = apply_bpe(&["mane".to_string()], &model);
        let seg_b = apply_bpe(&["mano".to_string()], &model);
        assert_eq!(seg_a[0], "man");
        assert_eq!(seg_b[0], "man");
    }

    #[test]
    fn save_load_round_trip_preserves_merges() {
        let corpus = sentences(&["banana", "bandana", "cabana"]);
        let model = learn_bpe(&[&corpus], 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bpe");
        model.save(&path).unwrap();
        let loaded = BpeModel::load(&path).unwrap();
        assert_eq!(loaded.merges, model.merges);
        assert_eq!(loaded.marker, model.marker);
        // Segmentation behaviour is identical after reload.
        let toks = vec!["banana".to_string(), "cab".to_string()];
        assert_eq!(apply_bpe(&toks, &loaded), apply_bpe(&toks, &model));
    }
}
