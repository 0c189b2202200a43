//! The four probe families. Each probe pairs a related item with a random
//! popular negative drawn from the top decile of the popularity index.
//!
//! | family         | inputs | targets | success when          |
//! |----------------|--------|---------|-----------------------|
//! | recommendation | 1      | 2       | L(T1 \| I1) > L(T2 \| I1) |
//! | attribute      | 1      | 2       | L(T1 \| I1) > L(T2 \| I1) |
//! | combination    | 1      | 2       | L(T1 \| I1) > L(T2 \| I1) |
//! | description    | 2      | 1       | L(T1 \| I1) > L(T1 \| I2) |
//!
//! Every query movie (or review) owns an RNG stream derived from the seed,
//! the family and its id, so the probe list does not depend on how the
//! work is scheduled.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::review_title;
use crate::stats::StatsStore;
use crate::text::delimit;
use crate::{jsonl, par, Error, Execution, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeFamily {
    Recommendation,
    Attribute,
    Combination,
    Description,
}

impl ProbeFamily {
    pub const ALL: [ProbeFamily; 4] = [
        ProbeFamily::Recommendation,
        ProbeFamily::Attribute,
        ProbeFamily::Combination,
        ProbeFamily::Description,
    ];

    pub fn short(self) -> &'static str {
        match self {
            ProbeFamily::Recommendation => "rec",
            ProbeFamily::Attribute => "attr",
            ProbeFamily::Combination => "combo",
            ProbeFamily::Description => "desc",
        }
    }

    fn salt(self) -> u64 {
        match self {
            ProbeFamily::Recommendation => 0x5245_4300,
            ProbeFamily::Attribute => 0x4154_5400,
            ProbeFamily::Combination => 0x434f_4d00,
            ProbeFamily::Description => 0x4445_5300,
        }
    }

    /// Whether the family compares two targets under one input (as opposed
    /// to one target under two inputs).
    pub fn compares_targets(self) -> bool {
        self != ProbeFamily::Description
    }
}

impl fmt::Display for ProbeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeFamily::Recommendation => "recommendation",
            ProbeFamily::Attribute => "attribute",
            ProbeFamily::Combination => "combination",
            ProbeFamily::Description => "description",
        })
    }
}

impl FromStr for ProbeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProbeFamily::ALL
            .into_iter()
            .find(|f| f.short() == s || f.to_string() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown probe family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_movie: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    pub positive_movie: u32,
    pub negative_movie: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeCase {
    pub family: ProbeFamily,
    pub inputs: Vec<String>,
    pub targets: Vec<String>,
    /// Index of the related input (description) or target (other families).
    pub positive_index: usize,
    pub metadata: ProbeMetadata,
}

/// Dialogue templates. `{query}`, `{tag}` and `{movie}` are substituted;
/// movie placeholders receive the `@`-delimited title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub recommendation: String,
    pub attribute: String,
    pub combination: String,
    pub description: String,
    pub answer: String,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            recommendation: "[user] can you recommend me a movie like {query}".into(),
            attribute: "[user] can you recommend me a {tag} movie?".into(),
            combination: "[user] can you recommend me a {tag} movie like {query}?".into(),
            description: "[user] what is your opinion on {movie}?".into(),
            answer: "sure, have you seen {movie}?".into(),
        }
    }
}

fn fill(template: &str, query: Option<&str>, tag: Option<&str>, movie: Option<&str>) -> String {
    let mut out = template.to_string();
    if let Some(q) = query {
        out = out.replace("{query}", &delimit(q));
    }
    if let Some(t) = tag {
        out = out.replace("{tag}", t);
    }
    if let Some(m) = movie {
        out = out.replace("{movie}", &delimit(m));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub seed: u64,
    /// Related movies considered per query.
    pub related_k: usize,
    /// Sentences in a description snippet.
    pub snippet_sentences: usize,
    pub templates: Templates,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            seed: 13,
            related_k: 10,
            snippet_sentences: 4,
            templates: Templates::default(),
        }
    }
}

impl ProbeConfig {
    pub fn with_seed(seed: u64) -> Self {
        ProbeConfig {
            seed,
            ..Default::default()
        }
    }

    fn rng(&self, family: ProbeFamily, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ family.salt());
        rng.set_stream(stream);
        rng
    }
}

/// Generated probes plus how many were dropped for lack of a valid negative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeSet {
    pub probes: Vec<ProbeCase>,
    pub skipped_no_negative: usize,
}

impl ProbeSet {
    fn merge(parts: Vec<(Vec<ProbeCase>, usize)>) -> Self {
        let mut set = ProbeSet::default();
        for (probes, skipped) in parts {
            set.probes.extend(probes);
            set.skipped_no_negative += skipped;
        }
        set
    }

    pub fn extend(&mut self, other: ProbeSet) {
        self.probes.extend(other.probes);
        self.skipped_no_negative += other.skipped_no_negative;
    }
}

fn draw_negative(rng: &mut ChaCha8Rng, store: &StatsStore, allowed: impl Fn(u32) -> bool) -> Option<u32> {
    let pool: Vec<u32> = store
        .popularity
        .top_decile()
        .iter()
        .copied()
        .filter(|m| allowed(*m))
        .collect();
    if pool.is_empty() {
        None
    } else {
        Some(pool[rng.random_range(0..pool.len())])
    }
}

fn eligible_queries(store: &StatsStore) -> Vec<u32> {
    store.popularity.eligible().iter().copied().collect()
}

/// One probe per (eligible query, top-k PMI² neighbor). The negative is a
/// popular movie outside the query's top-k and distinct from the query.
pub fn gen_recommendation_probes(store: &StatsStore, config: &ProbeConfig, exec: Execution) -> ProbeSet {
    let family = ProbeFamily::Recommendation;
    let t = &config.templates;
    let parts = par::map(exec, &eligible_queries(store), |&query| {
        let mut rng = config.rng(family, u64::from(query));
        let related = &store.ranking.related(query)[..store.ranking.related(query).len().min(config.related_k)];
        let query_title = store.lower_title(query);
        let mut out = Vec::new();
        let mut skipped = 0;
        for neighbor in related {
            let negative = draw_negative(&mut rng, store, |m| {
                m != query && !related.iter().any(|n| n.movie_id == m)
            });
            let Some(negative) = negative else {
                skipped += 1;
                continue;
            };
            out.push(ProbeCase {
                family,
                inputs: vec![fill(&t.recommendation, Some(&query_title), None, None)],
                targets: vec![
                    fill(&t.answer, None, None, Some(&store.lower_title(neighbor.movie_id))),
                    fill(&t.answer, None, None, Some(&store.lower_title(negative))),
                ],
                positive_index: 0,
                metadata: ProbeMetadata {
                    query_movie: Some(query),
                    tag: None,
                    positive_movie: neighbor.movie_id,
                    negative_movie: negative,
                    review_id: None,
                },
            });
        }
        (out, skipped)
    });
    ProbeSet::merge(parts)
}

/// One probe per (eligible movie, tag) association; the negative is a
/// popular movie that does not carry the tag.
pub fn gen_attribute_probes(store: &StatsStore, config: &ProbeConfig, exec: Execution) -> ProbeSet {
    let family = ProbeFamily::Attribute;
    let t = &config.templates;
    let movies: Vec<u32> = eligible_queries(store)
        .into_iter()
        .filter(|m| store.tags.tags_of(*m).is_some())
        .collect();
    let parts = par::map(exec, &movies, |&movie| {
        let mut rng = config.rng(family, u64::from(movie));
        let title = store.lower_title(movie);
        let mut out = Vec::new();
        let mut skipped = 0;
        for tag in store.tags.tags_of(movie).into_iter().flatten() {
            let Some(negative) = draw_negative(&mut rng, store, |m| m != movie && !store.tags.has(m, tag)) else {
                skipped += 1;
                continue;
            };
            out.push(ProbeCase {
                family,
                inputs: vec![fill(&t.attribute, None, Some(tag), None)],
                targets: vec![
                    fill(&t.answer, None, None, Some(&title)),
                    fill(&t.answer, None, None, Some(&store.lower_title(negative))),
                ],
                positive_index: 0,
                metadata: ProbeMetadata {
                    query_movie: None,
                    tag: Some(tag.clone()),
                    positive_movie: movie,
                    negative_movie: negative,
                    review_id: None,
                },
            });
        }
        (out, skipped)
    });
    ProbeSet::merge(parts)
}

/// One probe per (eligible query, top-k neighbor, tag shared by both); the
/// negative is a popular movie without the tag.
pub fn gen_combination_probes(store: &StatsStore, config: &ProbeConfig, exec: Execution) -> ProbeSet {
    let family = ProbeFamily::Combination;
    let t = &config.templates;
    let parts = par::map(exec, &eligible_queries(store), |&query| {
        let mut rng = config.rng(family, u64::from(query));
        let mut out = Vec::new();
        let mut skipped = 0;
        let Some(query_tags) = store.tags.tags_of(query) else {
            return (out, skipped);
        };
        let query_title = store.lower_title(query);
        let related = store.ranking.related(query);
        for neighbor in &related[..related.len().min(config.related_k)] {
            let Some(neighbor_tags) = store.tags.tags_of(neighbor.movie_id) else {
                continue;
            };
            for tag in query_tags.intersection(neighbor_tags) {
                let Some(negative) = draw_negative(&mut rng, store, |m| !store.tags.has(m, tag)) else {
                    skipped += 1;
                    continue;
                };
                out.push(ProbeCase {
                    family,
                    inputs: vec![fill(&t.combination, Some(&query_title), Some(tag), None)],
                    targets: vec![
                        fill(&t.answer, None, None, Some(&store.lower_title(neighbor.movie_id))),
                        fill(&t.answer, None, None, Some(&store.lower_title(negative))),
                    ],
                    positive_index: 0,
                    metadata: ProbeMetadata {
                        query_movie: Some(query),
                        tag: Some(tag.clone()),
                        positive_movie: neighbor.movie_id,
                        negative_movie: negative,
                        review_id: None,
                    },
                });
            }
        }
        (out, skipped)
    });
    ProbeSet::merge(parts)
}

/// One probe per review of an eligible movie: the same snippet (first
/// sentences of the review) conditioned on the reviewed movie and on a
/// random popular one.
pub fn gen_description_probes(store: &StatsStore, config: &ProbeConfig, exec: Execution) -> ProbeSet {
    let family = ProbeFamily::Description;
    let t = &config.templates;
    let indexed: Vec<usize> = (0..store.reviews.len()).collect();
    let parts = par::map(exec, &indexed, |&idx| {
        let review = &store.reviews[idx];
        let Some(movie) = review.movie.resolve(&store.catalog) else {
            return (Vec::new(), 0);
        };
        if review.sentences.is_empty() || !store.popularity.is_eligible(movie) {
            return (Vec::new(), 0);
        }
        let mut rng = config.rng(family, idx as u64);
        let Some(negative) = draw_negative(&mut rng, store, |m| m != movie) else {
            return (Vec::new(), 1);
        };
        let title = review_title(review, &store.catalog).unwrap_or_else(|| store.lower_title(movie));
        let take = review.sentences.len().min(config.snippet_sentences);
        let snippet = review.sentences[..take].join(" ").replace('@', " at ");
        let probe = ProbeCase {
            family,
            inputs: vec![
                fill(&t.description, None, None, Some(&title)),
                fill(&t.description, None, None, Some(&store.lower_title(negative))),
            ],
            targets: vec![crate::text::normalize_whitespace(&snippet).to_lowercase()],
            positive_index: 0,
            metadata: ProbeMetadata {
                query_movie: None,
                tag: None,
                positive_movie: movie,
                negative_movie: negative,
                review_id: Some(idx),
            },
        };
        (vec![probe], 0)
    });
    ProbeSet::merge(parts)
}

pub fn generate(store: &StatsStore, family: ProbeFamily, config: &ProbeConfig, exec: Execution) -> ProbeSet {
    match family {
        ProbeFamily::Recommendation => gen_recommendation_probes(store, config, exec),
        ProbeFamily::Attribute => gen_attribute_probes(store, config, exec),
        ProbeFamily::Combination => gen_combination_probes(store, config, exec),
        ProbeFamily::Description => gen_description_probes(store, config, exec),
    }
}

pub fn generate_all(store: &StatsStore, config: &ProbeConfig, exec: Execution) -> ProbeSet {
    let mut set = ProbeSet::default();
    for family in ProbeFamily::ALL {
        set.extend(generate(store, family, config, exec));
    }
    set
}

/// Checks a probe against the structural and sampling invariants. Returns
/// the first violation found.
pub fn audit(probe: &ProbeCase, store: &StatsStore, config: &ProbeConfig) -> std::result::Result<(), String> {
    let meta = &probe.metadata;
    let (n_in, n_out) = if probe.family.compares_targets() { (1, 2) } else { (2, 1) };
    if probe.inputs.len() != n_in || probe.targets.len() != n_out {
        return Err(format!(
            "{} probe has {} inputs / {} targets",
            probe.family,
            probe.inputs.len(),
            probe.targets.len()
        ));
    }
    if probe.positive_index != 0 {
        return Err("positive_index must point at the first slot".into());
    }
    if meta.positive_movie == meta.negative_movie {
        return Err("negative equals positive".into());
    }
    if !store.popularity.in_top_decile(meta.negative_movie) {
        return Err(format!("negative {} is not in the top decile", meta.negative_movie));
    }
    let carries = |movie: u32| meta.tag.as_deref().is_some_and(|t| store.tags.has(movie, t));
    match probe.family {
        ProbeFamily::Recommendation | ProbeFamily::Combination => {
            let query = meta.query_movie.ok_or("missing query movie")?;
            let related = store.ranking.related(query);
            let top = &related[..related.len().min(config.related_k)];
            if !top.iter().any(|n| n.movie_id == meta.positive_movie) {
                return Err("positive is not among the query's top related movies".into());
            }
            if probe.family == ProbeFamily::Recommendation && top.iter().any(|n| n.movie_id == meta.negative_movie) {
                return Err("negative is among the query's top related movies".into());
            }
            if probe.family == ProbeFamily::Combination {
                if !carries(meta.positive_movie) || !carries(query) {
                    return Err("tag is not shared by query and positive".into());
                }
                if carries(meta.negative_movie) {
                    return Err("negative carries the tag".into());
                }
            }
        }
        ProbeFamily::Attribute => {
            if !carries(meta.positive_movie) {
                return Err("positive lacks the tag".into());
            }
            if carries(meta.negative_movie) {
                return Err("negative carries the tag".into());
            }
        }
        ProbeFamily::Description => {
            let idx = meta.review_id.ok_or("missing review id")?;
            let review = store.reviews.get(idx).ok_or("review id out of range")?;
            let take = review.sentences.len().min(config.snippet_sentences);
            let expected = crate::text::normalize_whitespace(&review.sentences[..take].join(" ").replace('@', " at "))
                .to_lowercase();
            if probe.targets[0] != expected {
                return Err("description target is not the review's leading sentences".into());
            }
        }
    }
    Ok(())
}

pub fn write_probes(path: &Path, probes: &[ProbeCase]) -> Result<()> {
    jsonl::write(path, probes)
}

pub fn read_probes(path: &Path) -> Result<Vec<ProbeCase>> {
    jsonl::read(path)
}
