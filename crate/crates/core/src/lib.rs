//! Desk-scale laboratory for unsupervised machine translation between
//! related languages.
//!
//! The crate covers the full experimental loop: corpus handling, reversible
//! romanization of Dravidian scripts, character n-gram similarity, byte-pair
//! encoding, denoising corruption, a miniature encoder-decoder translation
//! model with hand-written gradients, training schedules (supervised,
//! unsupervised, cross-translation, cascaded), BLEU / character error
//! metrics, and a synthetic language family generator that makes the whole
//! pipeline testable on one machine in minutes.

pub mod corpus;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod schedules;
pub mod seeding;
pub mod similarity;
pub mod subword;
pub mod synthlang;
pub mod translit;
pub mod vocab;

pub use error::{Error, Result};
