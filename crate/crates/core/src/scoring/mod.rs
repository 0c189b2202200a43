//! Sequence scorers: anything that returns L(target | input), the
//! log-likelihood of a target text given an input text.
//!
//! Two desk-scale backends stand in for a fine-tuned sequence-to-sequence
//! model: [`CompositeScorer`] (PMI², tag overlap and popularity evidence from
//! the statistics store) and [`NgramModel`] (add-k smoothed n-grams). They
//! reproduce the direction of the effects probes are designed to measure,
//! not the values a trained model would produce. [`RemoteScorer`] talks to
//! an external service hosting the real model.

mod composite;
mod ngram;
mod remote;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use composite::{composite_score, extract_movies, input_tags, Components, CompositeScorer, CompositeWeights};
pub use ngram::{NgramConfig, NgramModel};
pub use remote::{RemoteConfig, RemoteScorer};

use crate::{par, Execution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("scorer unavailable: {0}")]
    Unavailable(String),
    #[error("scorer returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed scorer response: {0}")]
    Malformed(String),
    #[error("scorer produced NaN")]
    NotANumber,
    #[error("invalid scorer configuration: {0}")]
    Config(String),
}

/// A log-likelihood. Finite or negative infinity, never NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    #[serde(with = "log_likelihood_repr")]
    pub log_likelihood: f64,
    pub backend_id: String,
}

impl ScoreResult {
    pub fn new(log_likelihood: f64, backend_id: impl Into<String>) -> Result<Self, ScoreError> {
        if log_likelihood.is_nan() {
            return Err(ScoreError::NotANumber);
        }
        Ok(ScoreResult {
            log_likelihood,
            backend_id: backend_id.into(),
        })
    }

    pub fn is_neg_infinity(&self) -> bool {
        self.log_likelihood == f64::NEG_INFINITY
    }
}

/// JSON has no infinities: negative infinity travels as the string `"-inf"`.
pub mod log_likelihood_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("not a log-likelihood: {s:?}"))),
        }
    }
}

pub trait SequenceScorer: Send + Sync {
    fn backend_id(&self) -> &str;

    fn score(&self, input: &str, target: &str) -> Result<ScoreResult, ScoreError>;

    /// Scores many pairs; results are in request order.
    fn score_batch(&self, pairs: &[(String, String)], exec: Execution) -> Vec<Result<ScoreResult, ScoreError>> {
        par::map(exec, pairs, |(input, target)| self.score(input, target))
    }
}

impl<S: SequenceScorer + ?Sized> SequenceScorer for Box<S> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn score(&self, input: &str, target: &str) -> Result<ScoreResult, ScoreError> {
        (**self).score(input, target)
    }

    fn score_batch(&self, pairs: &[(String, String)], exec: Execution) -> Vec<Result<ScoreResult, ScoreError>> {
        (**self).score_batch(pairs, exec)
    }
}

impl<S: SequenceScorer + ?Sized> SequenceScorer for std::sync::Arc<S> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn score(&self, input: &str, target: &str) -> Result<ScoreResult, ScoreError> {
        (**self).score(input, target)
    }

    fn score_batch(&self, pairs: &[(String, String)], exec: Execution) -> Vec<Result<ScoreResult, ScoreError>> {
        (**self).score_batch(pairs, exec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Composite,
    Ngram,
    Remote,
}

impl std::str::FromStr for Backend {
    type Err = ScoreError;

    fn from_str(s: &str) -> Result<Self, ScoreError> {
        match s {
            "composite" => Ok(Backend::Composite),
            "ngram" => Ok(Backend::Ngram),
            "remote" => Ok(Backend::Remote),
            other => Err(ScoreError::Config(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    pub backend: Backend,
    pub weights: CompositeWeights,
    pub ngram: NgramConfig,
    pub remote: RemoteConfig,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            backend: Backend::Composite,
            weights: CompositeWeights::default(),
            ngram: NgramConfig::default(),
            remote: RemoteConfig::default(),
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<(), ScoreError> {
        self.weights.validate()?;
        self.ngram.validate()?;
        self.remote.validate()
    }
}
