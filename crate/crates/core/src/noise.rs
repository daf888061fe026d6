//! Input corruption for denoising auto-encoding.
//!
//! Two operations, applied in order: token drops (each token independently
//! with probability `p_drop`, but never all of them) and a local shuffle
//! that sorts tokens by `index + uniform(0, shuffle_k)`, which moves no
//! token more than `shuffle_k` positions from where it started.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub p_drop: f64,
    pub shuffle_k: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p_drop: 0.1,
            shuffle_k: 3,
        }
    }
}

/// Applies drop-then-shuffle corruption to any token sequence (words
/// during preprocessing, subword ids during training). With `p_drop = 0`
/// and `shuffle_k = 0` the input is returned unchanged. A non-empty input
/// always keeps at least one token: if every token is dropped, the first
/// survives.
pub fn corrupt<T: Clone>(tokens: &[T], cfg: &NoiseConfig, rng: &mut impl Rng) -> Vec<T> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let mut kept: Vec<&T> = tokens
        .iter()
        .filter(|_| !rng.gen_bool(cfg.p_drop))
        .collect();
    if kept.is_empty() {
        kept.push(&tokens[0]);
    }
    if cfg.shuffle_k == 0 {
        return kept.into_iter().cloned().collect();
    }
    let mut keyed: Vec<(f64, &T)> = kept
        .into_iter()
        .enumerate()
        .map(|(i, t)| (i as f64 + rng.gen::<f64>() * cfg.shuffle_k as f64, t))
        .collect();
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    keyed.into_iter().map(|(_, t)| t.clone()).collect()
}
