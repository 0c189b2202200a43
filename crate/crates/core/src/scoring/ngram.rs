//! Add-k smoothed n-gram model over `input ⧺ <sep> ⧺ target` token streams.
//!
//! Each stream is left-padded with `order − 1` start symbols. Every
//! non-padding position is an event, so for order 1 the probability of a
//! token is `(count(token) + k) / (N + k·V)` with N the number of events.
//! V counts the distinct training tokens (separator included) plus one
//! slot shared by all unseen tokens.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ScoreError, ScoreResult, SequenceScorer};
use crate::text::tokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub order: usize,
    pub smoothing: f64,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            order: 3,
            smoothing: 0.1,
        }
    }
}

impl NgramConfig {
    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.order == 0 {
            return Err(ScoreError::Config("n-gram order must be at least 1".into()));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(ScoreError::Config("smoothing constant must be positive".into()));
        }
        Ok(())
    }
}

const START: u32 = 0;
const SEP: u32 = 1;
const UNKNOWN: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct NgramModel {
    config: NgramConfig,
    vocab: HashMap<String, u32>,
    /// Full n-gram (context + token) → count.
    grams: HashMap<Vec<u32>, u64>,
    /// Context → number of events following it.
    contexts: HashMap<Vec<u32>, u64>,
    events: u64,
    id: String,
}

impl NgramModel {
    pub fn train<'a, I>(pairs: I, config: NgramConfig) -> Result<Self, ScoreError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        config.validate()?;
        let mut model = NgramModel {
            config,
            vocab: HashMap::new(),
            grams: HashMap::new(),
            contexts: HashMap::new(),
            events: 0,
            id: format!("ngram(n={},k={})", config.order, config.smoothing),
        };
        model.vocab.insert("<sep>".into(), SEP);
        for (input, target) in pairs {
            let mut stream = vec![START; config.order - 1];
            for t in tokens(input) {
                stream.push(model.intern(t));
            }
            stream.push(SEP);
            for t in tokens(target) {
                stream.push(model.intern(t));
            }
            for pos in config.order - 1..stream.len() {
                let gram = &stream[pos + 1 - config.order..=pos];
                *model.grams.entry(gram.to_vec()).or_insert(0) += 1;
                *model.contexts.entry(gram[..gram.len() - 1].to_vec()).or_insert(0) += 1;
                model.events += 1;
            }
        }
        Ok(model)
    }

    fn intern(&mut self, token: &str) -> u32 {
        let next = self.vocab.len() as u32 + 1;
        *self.vocab.entry(token.to_string()).or_insert(next)
    }

    fn lookup(&self, token: &str) -> u32 {
        self.vocab.get(token).copied().unwrap_or(UNKNOWN)
    }

    /// Distinct training tokens (separator included) plus the unseen slot.
    pub fn vocabulary_size(&self) -> usize {
        self.vocab.len() + 1
    }

    /// Number of counted events N.
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    fn log_prob(&self, gram: &[u32]) -> f64 {
        let k = self.config.smoothing;
        let v = self.vocabulary_size() as f64;
        let context = &gram[..gram.len() - 1];
        let joint = if gram.contains(&UNKNOWN) {
            0
        } else {
            self.grams.get(gram).copied().unwrap_or(0)
        };
        let ctx = if context.contains(&UNKNOWN) {
            0
        } else {
            self.contexts.get(context).copied().unwrap_or(0)
        };
        ((joint as f64 + k) / (ctx as f64 + k * v)).ln()
    }

    fn stream(&self, input: &str, prefix: &[&str]) -> Vec<u32> {
        let mut stream = vec![START; self.config.order - 1];
        stream.extend(tokens(input).into_iter().map(|t| self.lookup(t)));
        stream.push(SEP);
        stream.extend(prefix.iter().map(|t| self.lookup(t)));
        stream
    }

    /// Log-probability of `continuation` given the input and an already
    /// generated target `prefix`.
    pub fn continuation_log_prob(&self, input: &str, prefix: &str, continuation: &str) -> f64 {
        let mut stream = self.stream(input, &tokens(prefix));
        let n = self.config.order;
        let mut total = 0.0;
        for tok in tokens(continuation) {
            stream.push(self.lookup(tok));
            total += self.log_prob(&stream[stream.len() - n..]);
        }
        total
    }

    /// Σ log P(token | previous n−1 tokens) over the target. An empty
    /// target scores 0.
    pub fn target_log_prob(&self, input: &str, target: &str) -> f64 {
        self.continuation_log_prob(input, "", target)
    }
}

impl SequenceScorer for NgramModel {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn score(&self, input: &str, target: &str) -> Result<ScoreResult, ScoreError> {
        ScoreResult::new(self.target_log_prob(&input.to_lowercase(), &target.to_lowercase()), self.id.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(order: usize, smoothing: f64) -> NgramConfig {
        NgramConfig { order, smoothing }
    }

    #[test]
    fn unigram_matches_hand_computation() {
        // Streams: [a b <sep> c] [a <sep> a b] [b <sep>] → 10 events.
        // counts: a=3, b=3, c=1, <sep>=3; V = 4 distinct + 1 unseen = 5.
        let m = NgramModel::train([("a b", "c"), ("a", "a b"), ("b", "")], cfg(1, 0.5)).unwrap();
        assert_eq!(m.events(), 10);
        assert_eq!(m.vocabulary_size(), 5);
        let expect_a = ((3.0 + 0.5) / (10.0 + 0.5 * 5.0f64)).ln();
        assert!((m.target_log_prob("anything", "a") - expect_a).abs() < 1e-12);
        let expect_unseen = (0.5 / 12.5f64).ln();
        assert!((m.target_log_prob("x", "zzz") - expect_unseen).abs() < 1e-12);
    }

    #[test]
    fn empty_target_scores_zero() {
        let m = NgramModel::train([("a", "b")], cfg(2, 0.1)).unwrap();
        assert_eq!(m.target_log_prob("a", ""), 0.0);
        assert_eq!(m.score("a", "   ").unwrap().log_likelihood, 0.0);
    }

    #[test]
    fn bigram_conditions_on_separator() {
        let m = NgramModel::train([("q", "x"), ("q", "x"), ("r", "y")], cfg(2, 1.0)).unwrap();
        // context <sep> seen 3 times, followed by x twice; V = q x r y <sep> + unseen = 6
        let expect = ((2.0 + 1.0) / (3.0 + 6.0f64)).ln();
        assert!((m.target_log_prob("q", "x") - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(NgramModel::train([("a", "b")], cfg(0, 0.1)).is_err());
        assert!(NgramModel::train([("a", "b")], cfg(2, 0.0)).is_err());
    }
}
