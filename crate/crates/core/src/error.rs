//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parallel corpus line counts differ: {src_path} has {src_lines} lines, {tgt_path} has {tgt_lines} lines")]
    LineCountMismatch {
        src_path: PathBuf,
        tgt_path: PathBuf,
        src_lines: usize,
        tgt_lines: usize,
    },

    #[error("{path}:{line}: expected exactly one tab, found {tabs}")]
    TsvShape {
        path: PathBuf,
        line: usize,
        tabs: usize,
    },

    #[error("scheme {scheme}: {msg}")]
    BadScheme { scheme: String, msg: String },

    #[error("no transliteration entry for {codepoint} (U+{:04X}) in scheme {scheme}", *codepoint as u32)]
    UnmappedChar { codepoint: char, scheme: String },

    #[error("cannot restore Latin text at byte {at}: no table image matches {snippet:?}")]
    Unrestorable { at: usize, snippet: String },

    #[error("subword model: {0}")]
    Subword(String),

    #[error("model: {0}")]
    Model(String),

    #[error("schedule: {0}")]
    Schedule(String),

    #[error("synthetic language generator: {0}")]
    Synth(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
