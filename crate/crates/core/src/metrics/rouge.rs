use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};
use crate::text::{tokenize, tokenize_sentences};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_hits(hits: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(hits, candidate_total);
        let recall = ratio(hits, reference_total);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        RougeScore { precision, recall, f1 }
    }

    const PERFECT: RougeScore = RougeScore {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub r1: RougeScore,
    pub r2: RougeScore,
    pub rl: RougeScore,
    pub rlsum: RougeScore,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-n over token sequences. When neither side has an n-gram the
/// score is 1 for identical sequences and 0 otherwise.
pub fn rouge_n_tokens(candidate: &[String], reference: &[String], n: usize) -> RougeScore {
    let c = ngram_counts(candidate, n);
    let r = ngram_counts(reference, n);
    let c_total: usize = c.values().sum();
    let r_total: usize = r.values().sum();
    if c_total == 0 && r_total == 0 {
        return if candidate == reference && !candidate.is_empty() {
            RougeScore::PERFECT
        } else {
            RougeScore::default()
        };
    }
    let hits = r
        .iter()
        .map(|(g, rc)| c.get(g).map_or(0, |cc| (*cc).min(*rc)))
        .sum();
    RougeScore::from_hits(hits, c_total, r_total)
}

fn lcs_table(a: &[String], b: &[String]) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t
}

pub fn lcs_length(a: &[String], b: &[String]) -> usize {
    lcs_table(a, b)[a.len()][b.len()]
}

/// Positions in `reference` of one LCS with `candidate`. On a mismatch the
/// walk moves along the candidate only when that keeps a strictly longer
/// subsequence.
fn lcs_positions(reference: &[String], candidate: &[String]) -> Vec<usize> {
    let t = lcs_table(reference, candidate);
    let (mut i, mut j) = (reference.len(), candidate.len());
    let mut out = Vec::new();
    while i > 0 && j > 0 {
        if reference[i - 1] == candidate[j - 1] {
            out.push(i - 1);
            i -= 1;
            j -= 1;
        } else if t[i][j - 1] > t[i - 1][j] {
            j -= 1;
        } else {
            i -= 1;
        }
    }
    out.reverse();
    out
}

/// ROUGE-L over whole token sequences.
pub fn rouge_l_tokens(candidate: &[String], reference: &[String]) -> RougeScore {
    RougeScore::from_hits(lcs_length(reference, candidate), candidate.len(), reference.len())
}

/// Summary-level ROUGE-L: each reference sentence contributes the union of
/// its LCS positions against every candidate sentence, and matches are
/// clipped by the token counts of the two texts.
pub fn rouge_lsum_tokens(candidate: &[Vec<String>], reference: &[Vec<String>]) -> RougeScore {
    let c_total: usize = candidate.iter().map(Vec::len).sum();
    let r_total: usize = reference.iter().map(Vec::len).sum();
    let mut c_counts: HashMap<&str, usize> = HashMap::new();
    for t in candidate.iter().flatten() {
        *c_counts.entry(t).or_insert(0) += 1;
    }
    let mut r_counts: HashMap<&str, usize> = HashMap::new();
    for t in reference.iter().flatten() {
        *r_counts.entry(t).or_insert(0) += 1;
    }
    let mut hits = 0;
    for r in reference {
        let union: BTreeSet<usize> = candidate
            .iter()
            .flat_map(|c| lcs_positions(r, c))
            .collect();
        for pos in union {
            let token = r[pos].as_str();
            let (Some(cc), Some(rc)) = (c_counts.get(token).copied(), r_counts.get(token).copied()) else {
                continue;
            };
            if cc > 0 && rc > 0 {
                hits += 1;
                c_counts.insert(token, cc - 1);
                r_counts.insert(token, rc - 1);
            }
        }
    }
    RougeScore::from_hits(hits, c_total, r_total)
}

/// R-1, R-2 and R-L over token sequences, with R-LSum on the same tokens
/// taken as one sentence each.
pub fn rouge_tokens(candidate: &[String], reference: &[String]) -> RougeScores {
    RougeScores {
        r1: rouge_n_tokens(candidate, reference, 1),
        r2: rouge_n_tokens(candidate, reference, 2),
        rl: rouge_l_tokens(candidate, reference),
        rlsum: rouge_lsum_tokens(&[candidate.to_vec()], &[reference.to_vec()]),
    }
}

/// ROUGE-1/2/L/LSum of `candidate` against `reference`. R-LSum splits both
/// texts into sentences at newlines. An empty candidate scores zero.
pub fn rouge_scores(candidate: &str, reference: &str) -> Result<RougeScores> {
    let reference_tokens = tokenize(reference);
    if reference_tokens.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let candidate_tokens = tokenize(candidate);
    if candidate_tokens.is_empty() {
        return Ok(RougeScores::default());
    }
    Ok(RougeScores {
        r1: rouge_n_tokens(&candidate_tokens, &reference_tokens, 1),
        r2: rouge_n_tokens(&candidate_tokens, &reference_tokens, 2),
        rl: rouge_l_tokens(&candidate_tokens, &reference_tokens),
        rlsum: rouge_lsum_tokens(&tokenize_sentences(candidate), &tokenize_sentences(reference)),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn hand_example() {
        let s = rouge_scores("a b c", "a c d").unwrap();
        for x in [s.r1.precision, s.r1.recall, s.r1.f1, s.rl.precision, s.rl.recall, s.rl.f1] {
            assert!((x - 2.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(s.r2, RougeScore::default());
        assert_eq!(s.rlsum, s.rl);
    }

    #[test]
    fn identity_and_empty() {
        for text in ["one", "a b c d", "line one\nline two\nthree", "আমি ভাত খাই।"] {
            let s = rouge_scores(text, text).unwrap();
            for r in [s.r1, s.r2, s.rl, s.rlsum] {
                assert_eq!(r, RougeScore::PERFECT, "{text:?}");
            }
        }
        assert_eq!(rouge_scores("", "ref").unwrap(), RougeScores::default());
        assert_eq!(rouge_scores("x", " ... "), Err(MetricsError::EmptyReference));
    }

    #[test]
    fn single_tokens_differing() {
        let s = rouge_scores("a", "b").unwrap();
        assert_eq!(s.r2, RougeScore::default());
        assert_eq!(s.r1.f1, 0.0);
    }

    #[test]
    fn lsum_unions_sentence_matches() {
        // Reference sentence "a b c d" matches "a b" in one candidate
        // sentence and "c d" in the other.
        let s = rouge_scores("c d x\ny a b", "a b c d").unwrap();
        assert_eq!(s.rlsum.recall, 1.0);
        assert!((s.rlsum.precision - 4.0 / 6.0).abs() < 1e-12);
        assert!((s.rl.recall - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lsum_clips_repeated_tokens() {
        // Both reference sentences match the single candidate "a", which
        // can only be counted once.
        let s = rouge_lsum_tokens(&[toks("a")], &[toks("a"), toks("a")]);
        assert_eq!(s.recall, 0.5);
        assert_eq!(s.precision, 1.0);
    }

    proptest! {
        #[test]
        fn f1_is_symmetric(
            a in proptest::collection::vec("[a-d]", 1..20),
            b in proptest::collection::vec("[a-d]", 1..20),
        ) {
            let x = rouge_tokens(&a, &b);
            let y = rouge_tokens(&b, &a);
            for (p, q) in [(x.r1, y.r1), (x.r2, y.r2), (x.rl, y.rl), (x.rlsum, y.rlsum)] {
                prop_assert!((p.f1 - q.f1).abs() < 1e-9);
                prop_assert!((p.precision - q.recall).abs() < 1e-9);
                prop_assert!((p.recall - q.precision).abs() < 1e-9);
            }
        }

        #[test]
        fn bounded(
            a in proptest::collection::vec("[a-c]", 0..15),
            b in proptest::collection::vec("[a-c]", 1..15),
        ) {
            let s = rouge_tokens(&a, &b);
            for r in [s.r1, s.r2, s.rl, s.rlsum] {
                for v in [r.precision, r.recall, r.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
