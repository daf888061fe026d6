//! Lexical similarity between corpora via character n-gram overlap.
//!
//! Profiles count n-grams inside tokens only (no padding, no cross-token
//! windows), so a token shorter than n contributes nothing. The overlap of
//! two profiles is sum-of-minima over sum-of-maxima across the union of
//! their n-gram inventories: 1.0 for identical corpora, 0.0 when the
//! inventories are disjoint (for instance, corpora in different scripts).

use std::collections::HashMap;

/// Character n-gram counts for one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramProfile {
    pub n: usize,
    pub counts: HashMap<String, u64>,
}

impl NgramProfile {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Counts character n-grams over tokenized sentences.
pub fn profile(sentences: &[Vec<String>], n: usize) -> NgramProfile {
    assert!(n >= 1, "n-gram order must be at least 1");
    let mut counts: HashMap<String, u64> = HashMap::new();
    for sentence in sentences {
        for token in sentence {
            let chars: Vec<char> = token.chars().collect();
            if chars.len() < n {
                continue;
            }
            for window in chars.windows(n) {
                *counts.entry(window.iter().collect()).or_insert(0) += 1;
            }
        }
    }
    NgramProfile { n, counts }
}

/// Overlap of two profiles: Σ min(count_a, count_b) / Σ max(count_a, count_b)
/// over the union of n-grams. Sums are exact integers; the single division
/// happens at the end. Two empty profiles give 0.0.
pub fn overlap(a: &NgramProfile, b: &NgramProfile) -> f64 {
    assert_eq!(a.n, b.n, "profiles must use the same n-gram order");
    let mut min_sum: u64 = 0;
    let mut max_sum: u64 = 0;
    for (gram, &ca) in &a.counts {
        let cb = b.counts.get(gram).copied().unwrap_or(0);
        min_sum += ca.min(cb);
        max_sum += ca.max(cb);
    }
    for (gram, &cb) in &b.counts {
        if !a.counts.contains_key(gram) {
            max_sum += cb;
        }
    }
    if max_sum == 0 {
        return 0.0;
    }
    min_sum as f64 / max_sum as f64
}

/// Symmetric overlap matrix over several profiles.
pub fn pairwise_matrix(profiles: &[NgramProfile]) -> Vec<Vec<f64>> {
    let k = profiles.len();
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = overlap(&profiles[i], &profiles[j]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toks(words: &[&str]) -> Vec<Vec<String>> {
        vec![words.iter().map(|w| w.to_string()).collect()]
    }

    #[test]
    fn profile_counts_within_tokens() {
        let p = profile(&toks(&["abc", "bcd"]), 3);
        assert_eq!(p.counts.len(), 2);
        assert_eq!(p.counts["abc"], 1);
        assert_eq!(p.counts["bcd"], 1);
    }

    #[test]
    fn short_tokens_contribute_nothing() {
        let p = profile(&toks(&["ab", "x", ""]), 3);
        assert!(p.is_empty());
    }

    #[test]
    fn no_cross_token_windows() {
        // "ab" + "cd" must not produce "abc" or "bcd".
        let p = profile(&toks(&["ab", "cd"]), 3);
        assert!(p.is_empty());
    }

    #[test]
    fn overlap_hand_worked() {
        // A = {aaa:1, aab:1}, B = {aaa:1, bbb:1}
        // min-sum = 1, max-sum = 3.
        let a = profile(&toks(&["aaa", "aab"]), 3);
        let b = profile(&toks(&["aaa", "bbb"]), 3);
        assert_eq!(overlap(&a, &b), 1.0 / 3.0);
    }

    #[test]
    fn overlap_weighs_repeated_grams() {
        // A = {aaa:3} (from "aaaaa"), B = {aaa:1}: 1/3.
        let a = profile(&toks(&["aaaaa"]), 3);
        let b = profile(&toks(&["aaa"]), 3);
        assert_eq!(overlap(&a, &b), 1.0 / 3.0);
    }

    #[test]
    fn empty_profiles_give_zero() {
        let a = profile(&[], 3);
        let b = profile(&[], 3);
        assert_eq!(overlap(&a, &b), 0.0);
    }

    /// Independent brute-force overlap used as an oracle: materializes the
    /// union in a sorted map and accumulates integer sums.
    fn oracle_overlap(a: &NgramProfile, b: &NgramProfile) -> f64 {
        use std::collections::BTreeMap;
        let mut union: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
        for (g, &c) in &a.counts {
            union.entry(g).or_insert((0, 0)).0 = c;
        }
        for (g, &c) in &b.counts {
            union.entry(g).or_insert((0, 0)).1 = c;
        }
        let mut num: u64 = 0;
        let mut den: u64 = 0;
        for (_, (ca, cb)) in union {
            num += ca.min(cb);
            den += ca.max(cb);
        }
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    fn random_sentences(rng: &mut ChaCha8Rng, alphabet: &[char]) -> Vec<Vec<String>> {
        let n_sent = rng.gen_range(1..20);
        (0..n_sent)
            .map(|_| {
                let n_tok = rng.gen_range(1..10);
                (0..n_tok)
                    .map(|_| {
                        let len = rng.gen_range(1..8);
                        (0..len)
                            .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let alphabet: Vec<char> = "abcdef".chars().collect();
        for _ in 0..200 {
            let a = profile(&random_sentences(&mut rng, &alphabet), 3);
            let b = profile(&random_sentences(&mut rng, &alphabet), 3);
            assert_eq!(overlap(&a, &b), oracle_overlap(&a, &b));
        }
    }

    #[test]
    fn overlap_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let latin: Vec<char> = "abcdefgh".chars().collect();
        let other: Vec<char> = "αβγδεζηθ".chars().collect();
        for _ in 0..300 {
            let sa = random_sentences(&mut rng, &latin);
            let sb = random_sentences(&mut rng, &latin);
            let a = profile(&sa, 3);
            let b = profile(&sb, 3);
            let ab = overlap(&a, &b);
            assert_eq!(ab, overlap(&b, &a), "symmetry");
            assert!((0.0..=1.0).contains(&ab), "bounds");
            if !a.is_empty() {
                assert_eq!(overlap(&a, &a), 1.0, "self overlap");
            }
            let c = profile(&random_sentences(&mut rng, &other), 3);
            if !a.is_empty() || !c.is_empty() {
                assert_eq!(overlap(&a, &c), 0.0, "disjoint scripts");
            }
        }
    }

    #[test]
    fn matrix_is_symmetric_with_unit_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let alphabet: Vec<char> = "abcd".chars().collect();
        let profiles: Vec<NgramProfile> = (0..4)
            .map(|_| profile(&random_sentences(&mut rng, &alphabet), 3))
            .collect();
        let m = pairwise_matrix(&profiles);
        for i in 0..4 {
            assert_eq!(m[i][i], 1.0);
            for j in 0..4 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
    }
}
