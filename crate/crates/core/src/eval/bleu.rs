use std::collections::HashMap;

use crate::text::{title_spans, tokens};
use crate::{par, Error, Execution, Result};

/// Replaces every `@ … @` span, delimiters included, with `__unk__`.
pub fn mask_titles(text: &str) -> Result<String> {
    let spans = title_spans(text)?;
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for span in spans {
        out.push_str(&text[last..span.start]);
        out.push_str("__unk__");
        last = span.end;
    }
    out.push_str(&text[last..]);
    Ok(out)
}

/// Corpus-level sufficient statistics for BLEU up to order `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub candidate_len: u64,
    pub reference_len: u64,
}

impl BleuStats {
    fn zero(max_n: usize) -> Self {
        BleuStats {
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            candidate_len: 0,
            reference_len: 0,
        }
    }

    fn add(mut self, other: BleuStats) -> Self {
        for n in 0..self.matches.len() {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
        self
    }

    pub fn sentence(candidate: &str, reference: &str, max_n: usize) -> Self {
        let c = tokens(candidate);
        let r = tokens(reference);
        let mut stats = BleuStats::zero(max_n);
        stats.candidate_len = c.len() as u64;
        stats.reference_len = r.len() as u64;
        for n in 1..=max_n {
            if c.len() < n {
                continue;
            }
            let mut ref_counts: HashMap<&[&str], u64> = HashMap::new();
            for g in r.windows(n) {
                *ref_counts.entry(g).or_insert(0) += 1;
            }
            let mut cand_counts: HashMap<&[&str], u64> = HashMap::new();
            for g in c.windows(n) {
                *cand_counts.entry(g).or_insert(0) += 1;
            }
            stats.totals[n - 1] = (c.len() + 1 - n) as u64;
            stats.matches[n - 1] = cand_counts
                .iter()
                .map(|(g, k)| (*k).min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    /// `100 · BP · exp(mean ln pₙ)`, zero when any order has no match.
    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 || self.matches.contains(&0) {
            return 0.0;
        }
        let log_precision: f64 = self
            .matches
            .iter()
            .zip(&self.totals)
            .map(|(m, t)| (*m as f64 / *t as f64).ln())
            .sum::<f64>()
            / self.matches.len() as f64;
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        100.0 * brevity * log_precision.exp()
    }
}

/// Corpus BLEU with clipped n-gram precisions for n = 1..=max_n, one
/// reference per candidate, no smoothing.
pub fn bleu_n<S: AsRef<str> + Sync>(candidates: &[S], references: &[S], max_n: usize) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::Invalid("BLEU needs a non-empty corpus".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::Invalid(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    if max_n == 0 {
        return Err(Error::Invalid("BLEU order must be at least 1".into()));
    }
    let pairs: Vec<(&str, &str)> = candidates
        .iter()
        .zip(references)
        .map(|(c, r)| (c.as_ref(), r.as_ref()))
        .collect();
    let stats = par::map_reduce(
        Execution::Parallel,
        &pairs,
        || BleuStats::zero(max_n),
        |acc, (c, r)| *acc = std::mem::replace(acc, BleuStats::zero(max_n)).add(BleuStats::sentence(c, r, max_n)),
        BleuStats::add,
    );
    Ok(stats.score())
}

/// Corpus BLEU-4.
pub fn bleu<S: AsRef<str> + Sync>(candidates: &[S], references: &[S]) -> Result<f64> {
    bleu_n(candidates, references, 4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masking() {
        assert_eq!(
            mask_titles("sure, have you seen @ heat (1995) @ ?").unwrap(),
            "sure, have you seen __unk__ ?"
        );
        assert_eq!(mask_titles("no titles here").unwrap(), "no titles here");
        assert!(matches!(
            mask_titles("broken @ title"),
            Err(Error::UnbalancedDelimiter { offset: 7 })
        ));
    }

    #[test]
    fn identical_corpus_scores_100() {
        let x = ["the cat sat on the mat", "a quick brown fox jumps"];
        assert!((bleu(&x, &x).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let empty: [&str; 0] = [];
        assert!(bleu(&empty, &empty).is_err());
        assert!(bleu(&["a"], &["a", "b"]).is_err());
    }

    #[test]
    fn zero_precision_gives_zero() {
        assert_eq!(bleu(&["a b c"], &["a b c d"]).unwrap(), 0.0);
        assert_eq!(bleu(&["x y z w"], &["a b c d"]).unwrap(), 0.0);
    }
}
