use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ScoreError, ScoreResult, SequenceScorer};
use crate::ingest::Catalog;
use crate::stats::StatsStore;
use crate::text::{match_phrases, phrase_occurrences, title_spans};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeWeights {
    pub relation: f64,
    pub tag: f64,
    pub popularity: f64,
}

impl Default for CompositeWeights {
    fn default() -> Self {
        CompositeWeights {
            relation: 0.5,
            tag: 0.4,
            popularity: 0.1,
        }
    }
}

impl CompositeWeights {
    pub fn new(relation: f64, tag: f64, popularity: f64) -> Self {
        CompositeWeights {
            relation,
            tag,
            popularity,
        }
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        let ws = [self.relation, self.tag, self.popularity];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ScoreError::Config("composite weights must be finite and >= 0".into()));
        }
        if ws.iter().sum::<f64>() <= 0.0 {
            return Err(ScoreError::Config("at least one composite weight must be positive".into()));
        }
        Ok(())
    }

    fn total(&self) -> f64 {
        self.relation + self.tag + self.popularity
    }
}

/// Movies named in `text`: `@ … @` spans resolved against the catalog, or,
/// when the text has no `@` at all, catalog titles found verbatim
/// (lowercased, whole-phrase) in order of appearance.
pub fn extract_movies(text: &str, catalog: &Catalog) -> Vec<u32> {
    let lower = text.to_lowercase();
    if lower.contains('@') {
        let Ok(spans) = title_spans(&lower) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for span in spans {
            if let Some(id) = catalog.id_by_title(span.title) {
                if !out.contains(&id) {
                    out.push(id);
                }
            }
        }
        return out;
    }
    let mut hits: Vec<(usize, u32)> = catalog
        .lower_titles()
        .filter_map(|(title, id)| phrase_occurrences(&lower, title).first().map(|pos| (*pos, id)))
        .collect();
    hits.sort_unstable();
    hits.dedup_by_key(|h| h.1);
    hits.into_iter().map(|(_, id)| id).collect()
}

/// Tag-vocabulary phrases in `text` outside any delimited title.
pub fn input_tags<'s>(text: &str, store: &'s StatsStore) -> Vec<&'s str> {
    let lower = text.to_lowercase();
    let masked = match title_spans(&lower) {
        Ok(spans) => {
            let mut out = String::with_capacity(lower.len());
            let mut last = 0;
            for s in spans {
                out.push_str(&lower[last..s.start]);
                out.push(' ');
                last = s.end;
            }
            out.push_str(&lower[last..]);
            out
        }
        Err(_) => lower,
    };
    match_phrases(&masked, store.tags.vocabulary())
}

/// The three evidence terms, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Components {
    /// Largest normalized PMI² between an input movie and the target movie.
    pub relation: f64,
    /// Share of input tags the target movie carries.
    pub tag: f64,
    /// Log-popularity prior of the target movie.
    pub popularity: f64,
}

impl Components {
    pub fn compute(input: &str, target: &str, store: &StatsStore) -> Components {
        let input_movies = extract_movies(input, &store.catalog);
        let target_movie = extract_movies(target, &store.catalog).into_iter().next();
        let Some(target_movie) = target_movie else {
            // Prior-only path: with no movie in the target, the most popular
            // movie of the input stands in for it.
            let popularity = input_movies
                .iter()
                .map(|m| store.popularity.log_prior(*m))
                .fold(0.0, f64::max);
            return Components {
                relation: 0.0,
                tag: 0.0,
                popularity,
            };
        };
        let relation = input_movies
            .iter()
            .filter(|m| **m != target_movie)
            .map(|m| store.cooccurrence.normalized_pmi2(*m, target_movie))
            .fold(0.0, f64::max);
        let tags = input_tags(input, store);
        let tag = if tags.is_empty() {
            0.0
        } else {
            tags.iter().filter(|t| store.tags.has(target_movie, t)).count() as f64 / tags.len() as f64
        };
        Components {
            relation,
            tag,
            popularity: store.popularity.log_prior(target_movie),
        }
    }

    /// `ln(Σ wᵢ·cᵢ / Σ wᵢ)`; negative infinity when the sum is zero.
    pub fn log_likelihood(&self, w: &CompositeWeights) -> f64 {
        let sum = w.relation * self.relation + w.tag * self.tag + w.popularity * self.popularity;
        if sum <= 0.0 {
            f64::NEG_INFINITY
        } else {
            (sum / w.total()).ln().min(0.0)
        }
    }
}

pub fn composite_score(input: &str, target: &str, store: &StatsStore, weights: &CompositeWeights) -> ScoreResult {
    let ll = Components::compute(input, target, store).log_likelihood(weights);
    ScoreResult::new(ll, "composite").expect("components are finite")
}

#[derive(Debug, Clone)]
pub struct CompositeScorer {
    store: Arc<StatsStore>,
    weights: CompositeWeights,
    id: String,
}

impl CompositeScorer {
    pub fn new(store: Arc<StatsStore>, weights: CompositeWeights) -> Result<Self, ScoreError> {
        weights.validate()?;
        let id = format!(
            "composite({},{},{})",
            weights.relation, weights.tag, weights.popularity
        );
        Ok(CompositeScorer { store, weights, id })
    }

    pub fn weights(&self) -> CompositeWeights {
        self.weights
    }

    pub fn store(&self) -> &StatsStore {
        &self.store
    }
}

impl SequenceScorer for CompositeScorer {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn score(&self, input: &str, target: &str) -> Result<ScoreResult, ScoreError> {
        let ll = Components::compute(input, target, &self.store).log_likelihood(&self.weights);
        ScoreResult::new(ll, self.id.clone())
    }
}
