//! Construction of the shipped romanization tables.
//!
//! Kannada, Telugu, Tamil and Malayalam inherit the same letter layout from
//! Brahmi, so Unicode assigns corresponding letters the same offset within
//! each script block. One offset-to-Latin table plus a per-script presence
//! mask therefore produces all four schemes, and cognate letters are
//! guaranteed identical Latin images across scripts.
//!
//! The Latin side follows ISO 15919 with deterministic adjustments that keep
//! greedy longest-match restoration unambiguous:
//!
//! * independent vowels are capitalized (`A`, `Ā`, `Ai`, ...) so they can
//!   never be confused with the vowel tail of a consonant entry;
//! * aspiration is written with the modifier letter `ʰ` (U+02B0) instead of
//!   a plain `h`, so `kʰ` (one letter) differs from `k` + `h` (two letters);
//! * Malayalam chillu letters are capitalized pure consonants (`N`, `Ṟ`,
//!   ...), distinct from the consonant + virama forms.

use super::{ScriptId, TranslitScheme};

/// Slot within a script block.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    /// Stand-alone sign (anusvara, visarga, ...): one entry.
    Sign,
    /// Independent vowel letter: one entry.
    Vowel,
    /// Consonant letter: expands to bare-consonant, inherent-vowel and
    /// per-matra entries.
    Consonant,
    /// Dependent vowel sign; consumed by the consonant expansion.
    Matra,
    /// Native digit; forward-only entry onto an ASCII digit.
    Digit,
}

/// Shared block layout: (offset, kind, Latin value).
/// For consonants the value is the bare consonant; the inherent vowel `a`
/// and the matra vowels are appended during expansion.
const LAYOUT: &[(u32, Kind, &str)] = &[
    (0x01, Kind::Sign, "m\u{0310}"), // candrabindu
    (0x02, Kind::Sign, "ṁ"),         // anusvara
    (0x03, Kind::Sign, "ḥ"),         // visarga
    (0x05, Kind::Vowel, "A"),
    (0x06, Kind::Vowel, "Ā"),
    (0x07, Kind::Vowel, "I"),
    (0x08, Kind::Vowel, "Ī"),
    (0x09, Kind::Vowel, "U"),
    (0x0A, Kind::Vowel, "Ū"),
    (0x0B, Kind::Vowel, "R\u{0325}"),
    (0x0C, Kind::Vowel, "L\u{0325}"),
    (0x0E, Kind::Vowel, "E"),
    (0x0F, Kind::Vowel, "Ē"),
    (0x10, Kind::Vowel, "Ai"),
    (0x12, Kind::Vowel, "O"),
    (0x13, Kind::Vowel, "Ō"),
    (0x14, Kind::Vowel, "Au"),
    (0x15, Kind::Consonant, "k"),
    (0x16, Kind::Consonant, "kʰ"),
    (0x17, Kind::Consonant, "g"),
    (0x18, Kind::Consonant, "gʰ"),
    (0x19, Kind::Consonant, "ṅ"),
    (0x1A, Kind::Consonant, "c"),
    (0x1B, Kind::Consonant, "cʰ"),
    (0x1C, Kind::Consonant, "j"),
    (0x1D, Kind::Consonant, "jʰ"),
    (0x1E, Kind::Consonant, "ñ"),
    (0x1F, Kind::Consonant, "ṭ"),
    (0x20, Kind::Consonant, "ṭʰ"),
    (0x21, Kind::Consonant, "ḍ"),
    (0x22, Kind::Consonant, "ḍʰ"),
    (0x23, Kind::Consonant, "ṇ"),
    (0x24, Kind::Consonant, "t"),
    (0x25, Kind::Consonant, "tʰ"),
    (0x26, Kind::Consonant, "d"),
    (0x27, Kind::Consonant, "dʰ"),
    (0x28, Kind::Consonant, "n"),
    (0x29, Kind::Consonant, "ṉ"),
    (0x2A, Kind::Consonant, "p"),
    (0x2B, Kind::Consonant, "pʰ"),
    (0x2C, Kind::Consonant, "b"),
    (0x2D, Kind::Consonant, "bʰ"),
    (0x2E, Kind::Consonant, "m"),
    (0x2F, Kind::Consonant, "y"),
    (0x30, Kind::Consonant, "r"),
    (0x31, Kind::Consonant, "ṟ"),
    (0x32, Kind::Consonant, "l"),
    (0x33, Kind::Consonant, "ḷ"),
    (0x34, Kind::Consonant, "ḻ"),
    (0x35, Kind::Consonant, "v"),
    (0x36, Kind::Consonant, "ś"),
    (0x37, Kind::Consonant, "ṣ"),
    (0x38, Kind::Consonant, "s"),
    (0x39, Kind::Consonant, "h"),
    (0x3D, Kind::Sign, "\u{02BC}"), // avagraha
    (0x3E, Kind::Matra, "ā"),
    (0x3F, Kind::Matra, "i"),
    (0x40, Kind::Matra, "ī"),
    (0x41, Kind::Matra, "u"),
    (0x42, Kind::Matra, "ū"),
    (0x43, Kind::Matra, "r\u{0325}"),
    (0x44, Kind::Matra, "r\u{0325}\u{0304}"),
    (0x46, Kind::Matra, "e"),
    (0x47, Kind::Matra, "ē"),
    (0x48, Kind::Matra, "ai"),
    (0x4A, Kind::Matra, "o"),
    (0x4B, Kind::Matra, "ō"),
    (0x4C, Kind::Matra, "au"),
    // 0x4D is the virama; handled inside the consonant expansion.
    (0x57, Kind::Matra, "aŭ"), // stand-alone AU mark (Tamil, Malayalam)
    (0x60, Kind::Vowel, "R\u{0325}\u{0304}"),
    (0x61, Kind::Vowel, "L\u{0325}\u{0304}"),
    (0x66, Kind::Digit, "0"),
    (0x67, Kind::Digit, "1"),
    (0x68, Kind::Digit, "2"),
    (0x69, Kind::Digit, "3"),
    (0x6A, Kind::Digit, "4"),
    (0x6B, Kind::Digit, "5"),
    (0x6C, Kind::Digit, "6"),
    (0x6D, Kind::Digit, "7"),
    (0x6E, Kind::Digit, "8"),
    (0x6F, Kind::Digit, "9"),
];

const VIRAMA_OFFSET: u32 = 0x4D;

struct Block {
    name: &'static str,
    base: u32,
    end: u32,
    /// Offsets from LAYOUT that this script does not assign.
    missing: &'static [u32],
    /// Script-specific letters outside the shared layout: (codepoint, image).
    extra: &'static [(u32, &'static str)],
}

const BLOCKS: &[Block] = &[
    Block {
        name: "kannada",
        base: 0x0C80,
        end: 0x0CFF,
        missing: &[0x29, 0x57],
        extra: &[],
    },
    Block {
        name: "telugu",
        base: 0x0C00,
        end: 0x0C7F,
        missing: &[0x29, 0x57],
        extra: &[],
    },
    Block {
        name: "tamil",
        base: 0x0B80,
        end: 0x0BFF,
        missing: &[
            0x01, 0x0B, 0x0C, 0x16, 0x17, 0x18, 0x1B, 0x1D, 0x20, 0x21, 0x22, 0x25, 0x26, 0x27,
            0x2B, 0x2C, 0x2D, 0x3D, 0x43, 0x44, 0x60, 0x61,
        ],
        extra: &[],
    },
    Block {
        name: "malayalam",
        base: 0x0D00,
        end: 0x0D7F,
        missing: &[],
        // Chillu letters: vowelless consonants written as capitals.
        extra: &[
            (0x0D7A, "Ṇ"),
            (0x0D7B, "N"),
            (0x0D7C, "Ṟ"),
            (0x0D7D, "L"),
            (0x0D7E, "Ḷ"),
            (0x0D7F, "K"),
        ],
    },
];

pub const SCRIPT_NAMES: [&str; 4] = ["kannada", "telugu", "tamil", "malayalam"];

/// Script identity (name + codepoint range) for one of the four shipped
/// scripts.
pub fn script_id(name: &str) -> Option<ScriptId> {
    BLOCKS
        .iter()
        .find(|b| b.name == name)
        .map(|b| ScriptId::new(b.name, vec![(b.base, b.end)]))
}

fn cp(code: u32) -> char {
    char::from_u32(code).expect("table codepoint")
}

/// All (native, latin) entries for one script, in a stable order.
pub fn entries(name: &str) -> Option<Vec<(String, String)>> {
    let block = BLOCKS.iter().find(|b| b.name == name)?;
    let present = |off: u32| !block.missing.contains(&off);
    let virama = cp(block.base + VIRAMA_OFFSET);
    let mut out = Vec::new();
    for &(off, kind, latin) in LAYOUT {
        if !present(off) {
            continue;
        }
        let native = cp(block.base + off);
        match kind {
            Kind::Sign | Kind::Vowel | Kind::Digit => {
                out.push((native.to_string(), latin.to_string()));
            }
            Kind::Matra => {} // consumed below
            Kind::Consonant => {
                // Inherent vowel, bare form, then each matra combination.
                out.push((native.to_string(), format!("{latin}a")));
                out.push((format!("{native}{virama}"), latin.to_string()));
                for &(m_off, m_kind, m_latin) in LAYOUT {
                    if m_kind == Kind::Matra && present(m_off) {
                        let matra = cp(block.base + m_off);
                        out.push((format!("{native}{matra}"), format!("{latin}{m_latin}")));
                    }
                }
            }
        }
    }
    for &(code, latin) in block.extra {
        out.push((cp(code).to_string(), latin.to_string()));
    }
    Some(out)
}

/// The scheme as a TSV document (the format of the files under
/// `data/schemes/`).
pub fn scheme_tsv(name: &str) -> Option<String> {
    let entries = entries(name)?;
    let mut out = String::new();
    out.push_str(&format!(
        "# Reversible romanization table for {name}.\n\
         # native-sequence<TAB>latin-sequence; '#' starts a comment line.\n\
         # Entries whose image is all digits/punctuation are one-way:\n\
         # restoration keeps those characters in Latin.\n"
    ));
    for (native, latin) in entries {
        out.push_str(&native);
        out.push('\t');
        out.push_str(&latin);
        out.push('\n');
    }
    Some(out)
}

/// Builds the shipped scheme for one of the four script names.
pub fn builtin(name: &str) -> Option<TranslitScheme> {
    let id = script_id(name)?;
    let entries = entries(name)?;
    Some(
        TranslitScheme::from_entries(id, entries)
            .expect("shipped tables are structurally valid"),
    )
}
