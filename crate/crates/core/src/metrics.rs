//! Translation quality metrics: corpus BLEU and a character edit rate.
//!
//! BLEU uses clipped n-gram precisions up to order 4 accumulated over the
//! corpus, exponential smoothing for zero counts (halving: the k-th zero
//! precision becomes 1/(2^k · total)), a brevity penalty, and the geometric
//! mean over the orders for which the hypotheses contain any n-gram at all,
//! so identical corpora score exactly 100 regardless of sentence length.
//!
//! `character_ter` deviates deliberately from the published characTER
//! metric: there are NO shift operations here, only the plain character
//! Levenshtein distance on detokenized text divided by hypothesis character
//! count, micro-averaged (total edits over total hypothesis characters).
//! Comparisons between systems stay directional under this simplification.
//! An empty hypothesis against a non-empty reference contributes its full
//! reference length of edits over a denominator of one.

use std::collections::HashMap;

use crate::corpus::detokenize;
use crate::error::{Error, Result};

const MAX_N: usize = 4;

/// Corpus-level evaluation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub bleu: f64,
    pub character_ter: f64,
    pub sentences: usize,
    /// Clipped n-gram precisions for n = 1..=4 (after smoothing); 0.0 for
    /// orders without any hypothesis n-gram.
    pub precisions: [f64; MAX_N],
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn check_counts(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<()> {
    if hypotheses.len() != references.len() {
        return Err(Error::Model(format!(
            "evaluation count mismatch: {} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    Ok(())
}

fn bleu_with_precisions(
    hypotheses: &[Vec<String>],
    references: &[Vec<String>],
) -> Result<(f64, [f64; MAX_N])> {
    check_counts(hypotheses, references)?;
    if hypotheses.is_empty() {
        return Err(Error::Model("evaluation needs at least one pair".into()));
    }
    let mut matched = [0u64; MAX_N];
    let mut total = [0u64; MAX_N];
    let mut hyp_len: u64 = 0;
    let mut ref_len: u64 = 0;
    for (hyp, rf) in hypotheses.iter().zip(references) {
        if rf.is_empty() {
            return Err(Error::Model("empty reference sentence".into()));
        }
        hyp_len += hyp.len() as u64;
        ref_len += rf.len() as u64;
        for n in 1..=MAX_N {
            let hyp_counts = ngram_counts(hyp, n);
            let ref_counts = ngram_counts(rf, n);
            for (gram, &c) in &hyp_counts {
                total[n - 1] += c;
                let rc = ref_counts.get(gram).copied().unwrap_or(0);
                matched[n - 1] += c.min(rc);
            }
        }
    }

    let mut precisions = [0.0f64; MAX_N];
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    let mut smooth = 1.0f64;
    for n in 0..MAX_N {
        if total[n] == 0 {
            continue;
        }
        orders += 1;
        let p = if matched[n] == 0 {
            smooth *= 2.0;
            1.0 / (smooth * total[n] as f64)
        } else {
            matched[n] as f64 / total[n] as f64
        };
        precisions[n] = p;
        log_sum += p.ln();
    }
    if orders == 0 || hyp_len == 0 {
        return Ok((0.0, precisions));
    }
    let gm = (log_sum / orders as f64).exp();
    let brevity = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok((100.0 * brevity * gm, precisions))
}

/// Corpus BLEU in [0, 100] against a single reference per hypothesis.
pub fn bleu(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    bleu_with_precisions(hypotheses, references).map(|(score, _)| score)
}

/// Character-level Levenshtein distance with O(min(m, n)) memory.
pub fn char_edit_distance(a: &str, b: &str) -> u64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    let mut prev: Vec<u64> = (0..=short.len() as u64).collect();
    let mut curr = vec![0u64; short.len() + 1];
    for (i, &lc) in long.iter().enumerate() {
        curr[0] = i as u64 + 1;
        for (j, &sc) in short.iter().enumerate() {
            let sub = prev[j] + u64::from(lc != sc);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

/// Micro-averaged character edit rate on detokenized text; 0.0 only when
/// every hypothesis equals its reference, and may exceed 1.0 for short
/// hypotheses needing many edits.
pub fn character_ter(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    check_counts(hypotheses, references)?;
    let mut edits: u64 = 0;
    let mut chars: u64 = 0;
    for (hyp, rf) in hypotheses.iter().zip(references) {
        let h = detokenize(hyp);
        let r = detokenize(rf);
        edits += char_edit_distance(&h, &r);
        let h_chars = h.chars().count() as u64;
        chars += h_chars.max(1);
    }
    if chars == 0 {
        return Ok(0.0);
    }
    Ok(edits as f64 / chars as f64)
}

/// Both metrics plus the precision breakdown in one pass.
pub fn evaluate(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<EvalReport> {
    let (bleu, precisions) = bleu_with_precisions(hypotheses, references)?;
    let character_ter = character_ter(hypotheses, references)?;
    Ok(EvalReport {
        bleu,
        character_ter,
        sentences: hypotheses.len(),
        precisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sent(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn identical_corpora_score_100_and_0() {
        let c = vec![sent(&["the", "cat", "sat"]), sent(&["a"])];
        assert_eq!(bleu(&c, &c).unwrap(), 100.0);
        assert_eq!(character_ter(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn bleu_hand_worked_example() {
        // hyp a b c d vs ref a b x d:
        // p1 = 3/4, p2 = 1/3, p3 = 1/(2*2), p4 = 1/(4*1), BP = 1
        // BLEU = 100 * (3/4 * 1/3 * 1/4 * 1/4)^(1/4) = 100 / 64^(1/4).
        let hyp = vec![sent(&["a", "b", "c", "d"])];
        let rf = vec![sent(&["a", "b", "x", "d"])];
        let expected = 100.0 / 64f64.powf(0.25);
        assert!((bleu(&hyp, &rf).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn no_unigram_overlap_smooths_below_one() {
        // Thirty disjoint tokens: every precision is smoothed, the score is
        // tiny but, by construction of the smoothing, never exactly zero.
        let hyp: Vec<Vec<String>> = vec![(0..30).map(|i| format!("p{i}")).collect()];
        let rf: Vec<Vec<String>> = vec![(0..30).map(|i| format!("q{i}")).collect()];
        let b = bleu(&hyp, &rf).unwrap();
        assert!(b > 0.0 && b < 1.0, "got {b}");
    }

    #[test]
    fn brevity_penalty_punishes_short_hypotheses() {
        let long_ref = vec![sent(&["a", "b", "c", "d", "e", "f"])];
        let full = vec![sent(&["a", "b", "c", "d", "e", "f"])];
        let short = vec![sent(&["a", "b", "c"])];
        assert!(bleu(&short, &long_ref).unwrap() < bleu(&full, &long_ref).unwrap());
    }

    #[test]
    fn empty_hypotheses_score_zero() {
        let hyp = vec![Vec::<String>::new()];
        let rf = vec![sent(&["a", "b"])];
        assert_eq!(bleu(&hyp, &rf).unwrap(), 0.0);
    }

    #[test]
    fn count_mismatch_and_empty_reference_are_errors() {
        let one = vec![sent(&["a"])];
        let two = vec![sent(&["a"]), sent(&["b"])];
        assert!(bleu(&one, &two).is_err());
        assert!(character_ter(&one, &two).is_err());
        let empty_ref = vec![Vec::<String>::new()];
        assert!(bleu(&one, &empty_ref).is_err());
    }

    #[test]
    fn bleu_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let hyps = random_corpus(&mut rng, 12, 6);
        let refs = random_corpus(&mut rng, 12, 6);
        let base = bleu(&hyps, &refs).unwrap();
        let mut order: Vec<usize> = (0..hyps.len()).collect();
        order.shuffle(&mut rng);
        let h2: Vec<_> = order.iter().map(|&i| hyps[i].clone()).collect();
        let r2: Vec<_> = order.iter().map(|&i| refs[i].clone()).collect();
        assert_eq!(base, bleu(&h2, &r2).unwrap());
    }

    #[test]
    fn character_ter_hand_worked() {
        // "abc" vs "abd": one substitution over three characters.
        let hyp = vec![sent(&["abc"])];
        let rf = vec![sent(&["abd"])];
        assert!((character_ter(&hyp, &rf).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_hypothesis_contributes_reference_length_over_one() {
        let hyp = vec![Vec::<String>::new()];
        let rf = vec![sent(&["abc"])];
        assert_eq!(character_ter(&hyp, &rf).unwrap(), 3.0);
    }

    #[test]
    fn edit_distance_textbook_cases() {
        assert_eq!(char_edit_distance("kitten", "sitting"), 3);
        assert_eq!(char_edit_distance("", "abc"), 3);
        assert_eq!(char_edit_distance("abc", "abc"), 0);
        assert_eq!(char_edit_distance("ab", "ba"), 2);
    }

    #[test]
    fn edit_distance_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let alphabet: Vec<char> = "abcd".chars().collect();
        let word = |rng: &mut ChaCha8Rng| -> String {
            let len = rng.gen_range(0..10);
            (0..len)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect()
        };
        for _ in 0..500 {
            let a = word(&mut rng);
            let b = word(&mut rng);
            let c = word(&mut rng);
            assert!(
                char_edit_distance(&a, &c)
                    <= char_edit_distance(&a, &b) + char_edit_distance(&b, &c),
                "triangle violated on {a:?} {b:?} {c:?}"
            );
        }
    }

    #[test]
    fn report_carries_precisions() {
        let hyp = vec![sent(&["a", "b", "c", "d"])];
        let rf = vec![sent(&["a", "b", "x", "d"])];
        let report = evaluate(&hyp, &rf).unwrap();
        assert_eq!(report.sentences, 1);
        assert!((report.precisions[0] - 0.75).abs() < 1e-12);
        assert!((report.precisions[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    /// Straightforward full-matrix Levenshtein used as an oracle.
    fn oracle_distance(a: &str, b: &str) -> u64 {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut d = vec![vec![0u64; b.len() + 1]; a.len() + 1];
        for i in 0..=a.len() {
            d[i][0] = i as u64;
        }
        for j in 0..=b.len() {
            d[0][j] = j as u64;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let sub = d[i - 1][j - 1] + u64::from(a[i - 1] != b[j - 1]);
                d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
            }
        }
        d[a.len()][b.len()]
    }

    /// Independent BLEU recomputation used as an oracle: per-order maps,
    /// string-keyed n-grams, explicit smoothing walk.
    fn oracle_bleu(hyps: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
        use std::collections::BTreeMap;
        let grams = |toks: &[String], n: usize| -> BTreeMap<String, u64> {
            let mut m = BTreeMap::new();
            if toks.len() >= n {
                for w in toks.windows(n) {
                    *m.entry(w.join("\u{1}")).or_insert(0) += 1;
                }
            }
            m
        };
        let mut num = [0u64; 4];
        let mut den = [0u64; 4];
        let (mut hl, mut rl) = (0u64, 0u64);
        for (h, r) in hyps.iter().zip(refs) {
            hl += h.len() as u64;
            rl += r.len() as u64;
            for n in 1..=4 {
                let hg = grams(h, n);
                let rg = grams(r, n);
                for (g, c) in hg {
                    den[n - 1] += c;
                    num[n - 1] += c.min(rg.get(&g).copied().unwrap_or(0));
                }
            }
        }
        let mut logs = Vec::new();
        let mut halvings = 0u32;
        for n in 0..4 {
            if den[n] == 0 {
                continue;
            }
            let p = if num[n] == 0 {
                halvings += 1;
                1.0 / (2f64.powi(halvings as i32) * den[n] as f64)
            } else {
                num[n] as f64 / den[n] as f64
            };
            logs.push(p.ln());
        }
        if logs.is_empty() || hl == 0 {
            return 0.0;
        }
        let gm = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
        let bp = if hl >= rl {
            1.0
        } else {
            (1.0 - rl as f64 / hl as f64).exp()
        };
        100.0 * bp * gm
    }

    fn random_corpus(rng: &mut ChaCha8Rng, n_sents: usize, vocab: usize) -> Vec<Vec<String>> {
        (0..n_sents)
            .map(|_| {
                let len = rng.gen_range(1..12);
                (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect()
            })
            .collect()
    }

    #[test]
    fn matches_oracles_on_random_corpora() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..60 {
            let n = rng.gen_range(1..20);
            let hyps = random_corpus(&mut rng, n, 8);
            let refs = random_corpus(&mut rng, n, 8);
            let fast = bleu(&hyps, &refs).unwrap();
            let slow = oracle_bleu(&hyps, &refs);
            assert!((fast - slow).abs() < 1e-9, "bleu {fast} vs oracle {slow}");
            assert!((0.0..=100.0).contains(&fast));
            for (h, r) in hyps.iter().zip(&refs) {
                let hd = detokenize(h);
                let rd = detokenize(r);
                assert_eq!(char_edit_distance(&hd, &rd), oracle_distance(&hd, &rd));
            }
        }
    }
}
