//! A statistics-driven conversational policy: pull titles and tag words
//! out of the user's turns, gather candidates from PMI² neighbors and the
//! tag index, rank them with the composite scorer and answer with a
//! template.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scoring::{extract_movies, input_tags, Components, CompositeWeights};
use crate::stats::StatsStore;
use crate::text::delimit;
use crate::{Error, Result};

pub const GREETING: &str =
    "hi! tell me a movie you enjoyed or a kind of movie you are in the mood for, and i will suggest something.";
pub const ELICIT: &str =
    "i am not sure i know that one. could you name a movie you liked, or a genre or theme you enjoy?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: ChatRole,
    pub text: String,
}

impl ChatTurn {
    pub fn user(text: impl Into<String>) -> Self {
        ChatTurn {
            role: ChatRole::User,
            text: text.into(),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        ChatTurn {
            role: ChatRole::Assistant,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evidence {
    Pmi2,
    Tag,
    Mf,
    Popularity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub movie_id: u32,
    pub title: String,
    #[serde(with = "crate::scoring::log_likelihood_repr")]
    pub score: f64,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub reply: String,
    pub recommendations: Vec<Recommendation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatConfig {
    pub weights: CompositeWeights,
    /// Recommendations returned per reply.
    pub max_recommendations: usize,
    /// Candidates taken per mentioned tag, most popular first.
    pub per_tag: usize,
    /// Candidates taken per mentioned movie.
    pub per_movie: usize,
}

impl Default for ChatConfig {
    fn default() -> Self {
        ChatConfig {
            weights: CompositeWeights::default(),
            max_recommendations: 5,
            per_tag: 20,
            per_movie: 10,
        }
    }
}

/// Evidence extracted from a dialogue.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cues {
    pub movies: Vec<u32>,
    pub tags: Vec<String>,
}

pub fn user_cues(history: &[ChatTurn], store: &StatsStore) -> Cues {
    let mut cues = Cues::default();
    for turn in history.iter().filter(|t| t.role == ChatRole::User) {
        for m in extract_movies(&turn.text, &store.catalog) {
            if !cues.movies.contains(&m) {
                cues.movies.push(m);
            }
        }
        for t in input_tags(&turn.text, store) {
            if !cues.tags.iter().any(|x| x == t) {
                cues.tags.push(t.to_string());
            }
        }
    }
    cues
}

fn movie_candidates(movie: u32, store: &StatsStore, n: usize) -> Vec<(u32, Evidence)> {
    let related = store.ranking.related(movie);
    if !related.is_empty() {
        return related.iter().take(n).map(|nb| (nb.movie_id, Evidence::Pmi2)).collect();
    }
    if let Some(mf) = store.mf.as_ref().filter(|mf| mf.contains(movie)) {
        if let Ok(items) = mf.similar_items(movie, n) {
            return items.into_iter().map(|(m, _)| (m, Evidence::Mf)).collect();
        }
    }
    // Not eligible for the ranking: fall back to raw co-occurrence.
    let mut raw: Vec<(f64, u32)> = store
        .cooccurrence
        .neighbors(movie)
        .iter()
        .filter_map(|b| store.cooccurrence.pmi2(movie, *b).map(|p| (p, *b)))
        .collect();
    raw.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    raw.into_iter().take(n).map(|(_, m)| (m, Evidence::Pmi2)).collect()
}

fn tag_candidates(tag: &str, store: &StatsStore, n: usize) -> Vec<u32> {
    let Some(movies) = store.tags.movies_with(tag) else {
        return Vec::new();
    };
    let mut ms: Vec<u32> = movies.iter().copied().collect();
    ms.sort_by_key(|m| (std::cmp::Reverse(store.popularity.count(*m)), *m));
    ms.truncate(n);
    ms
}

/// Ranks candidates for the given cues, excluding `exclude`.
///
/// Candidates are the PMI² neighbors of the movies and the most popular
/// movies for each tag. When both kinds of evidence are present their
/// intersection is used, or the union when they share nothing.
pub fn rank(cues: &Cues, exclude: &[u32], store: &StatsStore, config: &ChatConfig) -> Vec<Recommendation> {
    let mut by_movie: BTreeMap<u32, Evidence> = BTreeMap::new();
    for m in &cues.movies {
        for (c, e) in movie_candidates(*m, store, config.per_movie) {
            by_movie.entry(c).or_insert(e);
        }
    }
    let mut by_tag: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for t in &cues.tags {
        for c in tag_candidates(t, store, config.per_tag) {
            by_tag.entry(c).or_default().push(t);
        }
    }
    let both: Vec<u32> = by_movie.keys().filter(|m| by_tag.contains_key(m)).copied().collect();
    let candidates: Vec<u32> = if !both.is_empty() {
        both
    } else {
        let mut all: Vec<u32> = by_movie.keys().chain(by_tag.keys()).copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    };

    let mut prompt = String::from("[user] can you recommend me a");
    for t in &cues.tags {
        prompt.push(' ');
        prompt.push_str(t);
    }
    prompt.push_str(" movie");
    if !cues.movies.is_empty() {
        prompt.push_str(" like");
        for m in &cues.movies {
            prompt.push(' ');
            prompt.push_str(&delimit(&store.lower_title(*m)));
        }
    }

    let w = config.weights;
    let mut out: Vec<Recommendation> = candidates
        .into_iter()
        .filter(|c| !exclude.contains(c) && !cues.movies.contains(c))
        .filter_map(|c| {
            let title = store.catalog.title(c)?.to_string();
            let target = reply_for(&store.lower_title(c));
            let comp = Components::compute(&prompt, &target, store);
            let parts = [
                (w.relation * comp.relation, by_movie.get(&c).copied().unwrap_or(Evidence::Pmi2)),
                (w.tag * comp.tag, Evidence::Tag),
                (w.popularity * comp.popularity, Evidence::Popularity),
            ];
            let evidence = if parts[0].0 == 0.0 && parts[1].0 == 0.0 && by_movie.get(&c) == Some(&Evidence::Mf) {
                Evidence::Mf
            } else {
                parts
                    .iter()
                    .fold((f64::MIN, Evidence::Popularity), |best, p| if p.0 > best.0 { *p } else { best })
                    .1
            };
            Some(Recommendation {
                movie_id: c,
                title,
                score: comp.log_likelihood(&w),
                evidence,
            })
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.movie_id.cmp(&b.movie_id)));
    out.truncate(config.max_recommendations);
    out
}

pub fn reply_for(title: &str) -> String {
    format!("sure, have you seen {}?", delimit(title))
}

/// Answers the latest user turn. Deterministic for a given history and store.
pub fn chat_respond(history: &[ChatTurn], store: &StatsStore, config: &ChatConfig) -> Result<ChatReply> {
    if history.iter().any(|t| t.text.trim().is_empty()) {
        return Err(Error::Invalid("chat turns must have non-empty text".into()));
    }
    if history.is_empty() {
        return Ok(ChatReply {
            reply: GREETING.into(),
            recommendations: Vec::new(),
        });
    }
    let cues = user_cues(history, store);
    let mut exclude: Vec<u32> = Vec::new();
    for t in history.iter().filter(|t| t.role == ChatRole::Assistant) {
        exclude.extend(extract_movies(&t.text, &store.catalog));
    }
    let recommendations = rank(&cues, &exclude, store, config);
    let reply = match recommendations.first() {
        Some(top) => reply_for(&top.title.to_lowercase()),
        None => ELICIT.into(),
    };
    Ok(ChatReply { reply, recommendations })
}

/// Recommendations for a movie title and/or a tag.
pub fn recommend(
    movie: Option<&str>,
    tag: Option<&str>,
    k: usize,
    store: &StatsStore,
    config: &ChatConfig,
) -> Result<Vec<Recommendation>> {
    let mut cues = Cues::default();
    if let Some(title) = movie {
        let id = store
            .catalog
            .id_by_title(title.trim())
            .ok_or_else(|| Error::UnknownMovie(title.to_string()))?;
        cues.movies.push(id);
    }
    if let Some(t) = tag {
        cues.tags.push(t.trim().to_lowercase());
    }
    let config = ChatConfig {
        max_recommendations: k,
        per_movie: config.per_movie.max(k),
        per_tag: config.per_tag.max(k),
        ..*config
    };
    Ok(rank(&cues, &[], store, &config))
}
