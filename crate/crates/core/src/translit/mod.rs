//! Reversible romanization of Indic scripts (plus synthetic ones).
//!
//! A scheme is an ordered table of `native-sequence → latin-sequence`
//! entries. Romanization walks the text and greedily applies the longest
//! matching native entry; restoration does the same with the Latin images.
//! ASCII digits and sentence punctuation always stay in Latin: entries whose
//! image consists purely of such characters (native digits) are one-way, and
//! restoration never touches protected characters. Text outside the scheme's
//! script — Latin words in code-mixed sentences, other scripts — passes
//! through romanization unchanged, which is also where restoration becomes
//! lossy: it cannot tell such passthrough apart from romanized native text.

pub mod iso;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::is_punctuation;
use crate::error::{Error, Result};

/// Characters that stay in Latin through a romanize/restore round trip.
pub fn is_protected(c: char) -> bool {
    c.is_ascii_digit() || is_punctuation(c)
}

/// A named script with the codepoint ranges it owns. Characters inside an
/// owned range must be covered by the scheme table; characters outside all
/// ranges pass through romanization untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptId {
    pub name: String,
    /// Inclusive codepoint ranges.
    pub ranges: Vec<(u32, u32)>,
}

impl ScriptId {
    pub fn new(name: impl Into<String>, ranges: Vec<(u32, u32)>) -> Self {
        ScriptId {
            name: name.into(),
            ranges,
        }
    }

    pub fn owns(&self, c: char) -> bool {
        let v = c as u32;
        self.ranges.iter().any(|&(lo, hi)| v >= lo && v <= hi)
    }

    /// The four shipped Dravidian scripts.
    pub fn builtins() -> Vec<ScriptId> {
        iso::SCRIPT_NAMES
            .iter()
            .map(|n| iso::script_id(n).unwrap())
            .collect()
    }
}

/// Tags each character with the registry script that owns it; `None` covers
/// Latin text, digits, punctuation and anything else unclaimed.
pub fn detect_script<'r>(text: &str, registry: &'r [ScriptId]) -> Vec<Option<&'r ScriptId>> {
    text.chars()
        .map(|c| registry.iter().find(|s| s.owns(c)))
        .collect()
}

/// One table row.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub native: String,
    pub latin: String,
    /// True when the image is all digits/punctuation: the entry romanizes
    /// but never restores (native digits stay Latin after a round trip).
    pub forward_only: bool,
}

#[derive(Debug, Clone, Default)]
struct Trie {
    nodes: Vec<TrieNode>,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: BTreeMap<char, usize>,
    terminal: Option<usize>,
}

impl Trie {
    fn new() -> Self {
        Trie {
            nodes: vec![TrieNode::default()],
        }
    }

    fn insert(&mut self, key: &str, entry: usize) {
        let mut node = 0;
        for c in key.chars() {
            node = match self.nodes[node].children.get(&c) {
                Some(&n) => n,
                None => {
                    self.nodes.push(TrieNode::default());
                    let n = self.nodes.len() - 1;
                    self.nodes[node].children.insert(c, n);
                    n
                }
            };
        }
        self.nodes[node].terminal = Some(entry);
    }

    /// Longest entry matching a prefix of `chars[start..]`.
    fn longest_match(&self, chars: &[char], start: usize) -> Option<(usize, usize)> {
        let mut node = 0;
        let mut best = None;
        for (len, &c) in chars[start..].iter().enumerate() {
            match self.nodes[node].children.get(&c) {
                Some(&n) => {
                    node = n;
                    if let Some(e) = self.nodes[node].terminal {
                        best = Some((len + 1, e));
                    }
                }
                None => break,
            }
        }
        best
    }

    fn starts_with(&self, c: char) -> bool {
        self.nodes[0].children.contains_key(&c)
    }
}

/// A loaded, structurally checked romanization table.
#[derive(Debug, Clone)]
pub struct TranslitScheme {
    pub script: ScriptId,
    pub entries: Vec<Entry>,
    forward: Trie,
    inverse: Trie,
}

impl TranslitScheme {
    /// Builds a scheme from (native, latin) rows, running the cheap
    /// structural checks (non-empty fields, unique natives, globally unique
    /// images, no protected characters inside letter images). The thorough
    /// decodability check is [`validate_scheme`].
    pub fn from_entries(script: ScriptId, rows: Vec<(String, String)>) -> Result<TranslitScheme> {
        let bad = |msg: String| Error::BadScheme {
            scheme: script.name.clone(),
            msg,
        };
        let mut entries = Vec::with_capacity(rows.len());
        let mut seen_native: BTreeMap<&str, ()> = BTreeMap::new();
        let mut seen_latin: BTreeMap<&str, ()> = BTreeMap::new();
        for (native, latin) in &rows {
            if native.is_empty() || latin.is_empty() {
                return Err(bad("empty native or latin field".into()));
            }
            let protected = latin.chars().filter(|&c| is_protected(c)).count();
            let total = latin.chars().count();
            let forward_only = protected == total;
            if protected > 0 && !forward_only {
                return Err(bad(format!(
                    "image {latin:?} mixes protected and letter characters"
                )));
            }
            entries.push(Entry {
                native: native.clone(),
                latin: latin.clone(),
                forward_only,
            });
        }
        for e in &entries {
            if seen_native.insert(&e.native, ()).is_some() {
                return Err(bad(format!("duplicate native entry {:?}", e.native)));
            }
            if seen_latin.insert(&e.latin, ()).is_some() {
                return Err(bad(format!(
                    "two entries share the Latin image {:?}",
                    e.latin
                )));
            }
        }
        let mut forward = Trie::new();
        let mut inverse = Trie::new();
        for (i, e) in entries.iter().enumerate() {
            forward.insert(&e.native, i);
            if !e.forward_only {
                inverse.insert(&e.latin, i);
            }
        }
        Ok(TranslitScheme {
            script,
            entries,
            forward,
            inverse,
        })
    }

    /// One of the four shipped schemes, by script name.
    pub fn builtin(name: &str) -> Option<TranslitScheme> {
        iso::builtin(name)
    }

    /// Parses the TSV table format (`native<TAB>latin`, `#` comments).
    /// The script name is taken from the file stem; if it is not a shipped
    /// script, the script's ranges are derived from the native characters
    /// present in the table.
    pub fn load(path: impl AsRef<Path>) -> Result<TranslitScheme> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scheme".into());
        Self::parse(&name, &text).map_err(|e| match e {
            Error::BadScheme { msg, .. } => Error::Format {
                path: path.to_path_buf(),
                msg,
            },
            other => other,
        })
    }

    /// Parses TSV text; `name` selects builtin ranges when it matches a
    /// shipped script, otherwise ranges are derived from the table itself.
    pub fn parse(name: &str, text: &str) -> Result<TranslitScheme> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (native, latin) = line.split_once('\t').ok_or_else(|| Error::BadScheme {
                scheme: name.to_string(),
                msg: format!("line {}: expected native<TAB>latin", i + 1),
            })?;
            rows.push((native.to_string(), latin.to_string()));
        }
        let script = iso::script_id(name).unwrap_or_else(|| {
            let mut points: Vec<u32> = rows
                .iter()
                .flat_map(|(n, _)| n.chars().map(|c| c as u32))
                .collect();
            points.sort_unstable();
            points.dedup();
            ScriptId::new(name, singleton_ranges(&points))
        });
        Self::from_entries(script, rows)
    }

    /// Serializes in the same TSV format `load` reads.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# Reversible romanization table for {}.", self.script.name);
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}", e.native, e.latin);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

fn singleton_ranges(sorted_points: &[u32]) -> Vec<(u32, u32)> {
    let mut ranges: Vec<(u32, u32)> = Vec::new();
    for &p in sorted_points {
        match ranges.last_mut() {
            Some((_, hi)) if *hi + 1 == p => *hi = p,
            _ => ranges.push((p, p)),
        }
    }
    ranges
}

/// Converts native-script text to Latin. Characters the script does not own
/// (Latin, digits, punctuation, other scripts) pass through unchanged; an
/// owned character that no entry covers is an error naming the codepoint.
pub fn romanize(text: &str, scheme: &TranslitScheme) -> Result<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if scheme.script.owns(c) {
            match scheme.forward.longest_match(&chars, i) {
                Some((len, entry)) => {
                    out.push_str(&scheme.entries[entry].latin);
                    i += len;
                }
                None => {
                    return Err(Error::UnmappedChar {
                        codepoint: c,
                        scheme: scheme.script.name.clone(),
                    })
                }
            }
        } else {
            out.push(c);
            i += 1;
        }
    }
    Ok(out)
}

/// Converts romanized text back to native script. Protected characters and
/// characters that cannot begin any Latin image pass through; a character
/// that begins an image but completes none is an error naming the position.
pub fn restore(text: &str, scheme: &TranslitScheme) -> Result<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut byte_pos = 0;
    while i < chars.len() {
        let c = chars[i];
        if !is_protected(c) && scheme.inverse.starts_with(c) {
            match scheme.inverse.longest_match(&chars, i) {
                Some((len, entry)) => {
                    out.push_str(&scheme.entries[entry].native);
                    for k in 0..len {
                        byte_pos += chars[i + k].len_utf8();
                    }
                    i += len;
                }
                None => {
                    let snippet: String = chars[i..].iter().take(8).collect();
                    return Err(Error::Unrestorable {
                        at: byte_pos,
                        snippet,
                    });
                }
            }
        } else {
            out.push(c);
            byte_pos += c.len_utf8();
            i += 1;
        }
    }
    Ok(out)
}

/// Thorough scheme validation: forward injectivity and unique decodability
/// of greedy longest-match restoration, established by round-tripping every
/// concatenation of up to three letter-entry images. The triple stage only
/// materializes concatenations that could possibly go wrong — an image
/// overrunning the first entry must extend one of its prefix-extensions —
/// which keeps the check exact but fast.
pub fn validate_scheme(scheme: &TranslitScheme) -> Result<()> {
    let bad = |msg: String| {
        Err(Error::BadScheme {
            scheme: scheme.script.name.clone(),
            msg,
        })
    };
    // Structural checks run in from_entries; re-check image uniqueness here
    // so a hand-constructed scheme cannot sneak past.
    {
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for e in &scheme.entries {
            if let Some(prev) = seen.insert(&e.latin, &e.native) {
                return bad(format!(
                    "entries {:?} and {:?} share image {:?}",
                    prev, e.native, e.latin
                ));
            }
        }
    }

    let letters: Vec<&Entry> = scheme.entries.iter().filter(|e| !e.forward_only).collect();
    for e in &letters {
        if e.latin.chars().any(is_protected) {
            return bad(format!(
                "letter entry {:?} has protected characters in image {:?}",
                e.native, e.latin
            ));
        }
    }

    let round_trip = |native: &str, latin: &str| -> Result<()> {
        let restored = restore(latin, scheme)?;
        if restored != native {
            return bad(format!(
                "concatenation {native:?} romanizes to {latin:?} but restores to {restored:?}"
            ));
        }
        Ok(())
    };

    // Singles and all pairs.
    for a in &letters {
        round_trip(&a.native, &a.latin)?;
    }
    for a in &letters {
        for b in &letters {
            round_trip(
                &format!("{}{}", a.native, b.native),
                &format!("{}{}", a.latin, b.latin),
            )?;
        }
    }

    // Triples (a, b, c). Given injectivity and a clean pair pass, parsing
    // img(a)+img(b)+img(c) can only fail if some image strictly longer than
    // img(a) matches a prefix reaching into img(c); that image must be a
    // strict extension of img(a) whose remainder swallows img(b) whole.
    let images: Vec<Vec<char>> = letters.iter().map(|e| e.latin.chars().collect()).collect();
    for (ai, a) in letters.iter().enumerate() {
        let a_img = &images[ai];
        let mut remainders: Vec<&[char]> = Vec::new();
        for other in &images {
            if other.len() > a_img.len() && other[..a_img.len()] == a_img[..] {
                remainders.push(&other[a_img.len()..]);
            }
        }
        if remainders.is_empty() {
            continue;
        }
        for (bi, b) in letters.iter().enumerate() {
            let b_img = &images[bi];
            let spans_b = remainders
                .iter()
                .any(|r| r.len() > b_img.len() && r[..b_img.len()] == b_img[..]);
            if !spans_b {
                continue;
            }
            for c in &letters {
                round_trip(
                    &format!("{}{}{}", a.native, b.native, c.native),
                    &format!("{}{}{}", a.latin, b.latin, c.latin),
                )?;
            }
        }
    }
    Ok(())
}
