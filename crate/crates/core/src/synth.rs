//! Synthetic datasets with planted structure, in the raw formats the
//! ingest parsers read.
//!
//! Movies fall into clusters. Each user likes a popularity-weighted subset
//! of one cluster, so co-occurrence (and therefore PMI²) is high inside a
//! cluster and rare across clusters. Each cluster has its own tags, and a
//! few global tags are sprinkled over the whole catalog.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{MovieRecord, MovieRef, RatingEvent, Review, TagRelevance};
use crate::{Error, Result};

const CLUSTER_NAMES: &[&str] = &[
    "Midnight", "Starship", "Sunny", "Vault", "Meadow", "Trench", "Harbor", "Ember",
];

const CLUSTER_TAGS: &[[&str; 2]] = &[
    ["vampire", "gothic"],
    ["science fiction", "time travel"],
    ["romantic comedy", "wedding"],
    ["heist", "crime"],
    ["animation", "talking animals"],
    ["war", "based on a true story"],
    ["western", "revenge"],
    ["horror", "haunted house"],
];

const GLOBAL_TAGS: &[&str] = &["excellent", "based on a book", "adapted from:book"];

const OPENERS: &[&str] = &[
    "Watching this several times as a child was quite the experience.",
    "I went in with low expectations.",
    "My friends dragged me to see this one.",
    "This was a surprise from start to finish.",
    "I have mixed feelings about it.",
];

const MIDDLES: &[&str] = &[
    "The {tag} angle is handled with real care.",
    "Every scene leans into the {tag} theme!",
    "Fans of {tag} stories will find plenty here.",
    "The pacing drags in the middle though.",
    "The soundtrack is better than it has any right to be.",
    "Would I watch it again?",
];

const CLOSERS: &[&str] = &[
    "Highly recommended.",
    "Not for everyone, but I liked it.",
    "Seven out of ten.",
    "Give it a try!",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub clusters: usize,
    pub movies_per_cluster: usize,
    pub users: usize,
    /// Liked movies per user, inclusive range.
    pub likes_per_user: (usize, usize),
    /// Probability that a user also likes one movie from another cluster.
    pub cross_like_rate: f64,
    pub reviews_per_movie: usize,
    pub dialogues: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            clusters: 6,
            movies_per_cluster: 20,
            users: 900,
            likes_per_user: (10, 20),
            cross_like_rate: 0.15,
            reviews_per_movie: 2,
            dialogues: 50,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SynthData {
    pub movies: Vec<MovieRecord>,
    pub ratings: Vec<RatingEvent>,
    pub tag_names: Vec<(u32, String)>,
    pub tag_scores: Vec<(u32, u32, f32)>,
    pub reviews: Vec<Review>,
    /// Raw ReDial records, one JSON document per entry.
    pub redial_lines: Vec<String>,
}

pub fn movie_id(cluster: usize, index: usize) -> u32 {
    (cluster * 100 + index + 1) as u32
}

pub fn cluster_of(movie: u32) -> usize {
    ((movie - 1) / 100) as usize
}

pub fn cluster_tags(cluster: usize) -> [&'static str; 2] {
    CLUSTER_TAGS[cluster % CLUSTER_TAGS.len()]
}

pub fn title(cluster: usize, index: usize) -> String {
    let name = CLUSTER_NAMES[cluster % CLUSTER_NAMES.len()];
    let round = cluster / CLUSTER_NAMES.len();
    let year = 1970 + (cluster * 7 + index * 3) % 50;
    if round == 0 {
        format!("{name} Tale {} ({year})", index + 1)
    } else {
        format!("{name} Tale {}-{} ({year})", round, index + 1)
    }
}

impl SynthData {
    pub fn generate(config: &SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut data = SynthData::default();
        let n = config.movies_per_cluster;

        for c in 0..config.clusters {
            for j in 0..n {
                data.movies.push(MovieRecord {
                    movie_id: movie_id(c, j),
                    title_with_year: title(c, j),
                    genres: vec![CLUSTER_NAMES[c % CLUSTER_NAMES.len()].to_string()],
                });
            }
        }

        // Zipf-like popularity inside each cluster.
        let weights: Vec<f64> = (0..n).map(|j| 1.0 / ((j + 1) as f64).powf(0.8)).collect();
        let mut ts: i64 = 1_000_000_000;
        for user in 0..config.users {
            let cluster = user % config.clusters;
            let likes = rng.random_range(config.likes_per_user.0..=config.likes_per_user.1).min(n);
            let picked = rand::seq::index::sample_weighted(&mut rng, n, |j| weights[j], likes)
                .expect("positive weights");
            let mut events: Vec<(u32, f32)> = picked
                .into_iter()
                .map(|j| (movie_id(cluster, j), if rng.random_bool(0.5) { 4.5 } else { 5.0 }))
                .collect();
            if config.clusters > 1 && rng.random_bool(config.cross_like_rate) {
                let other = (cluster + rng.random_range(1..config.clusters)) % config.clusters;
                events.push((movie_id(other, rng.random_range(0..n)), 5.0));
            }
            // Ratings that must not count as likes.
            for _ in 0..3 {
                let other = rng.random_range(0..config.clusters);
                let m = movie_id(other, rng.random_range(0..n));
                if !events.iter().any(|e| e.0 == m) {
                    events.push((m, [2.0, 3.5, 4.0][rng.random_range(0..3)]));
                }
            }
            events.shuffle(&mut rng);
            for (m, r) in events {
                ts += rng.random_range(1..5000);
                data.ratings.push(RatingEvent {
                    user_id: user as u32 + 1,
                    movie_id: m,
                    rating: r,
                    timestamp: ts,
                });
            }
        }

        let mut names: Vec<String> = Vec::new();
        for c in 0..config.clusters {
            for t in cluster_tags(c) {
                if !names.iter().any(|x| x == t) {
                    names.push(t.to_string());
                }
            }
        }
        names.extend(GLOBAL_TAGS.iter().map(|s| s.to_string()));
        names.push("boring".into());
        data.tag_names = names.iter().enumerate().map(|(i, s)| (i as u32 + 1, s.clone())).collect();
        let tag_id = |name: &str| names.iter().position(|x| x == name).expect("known tag") as u32 + 1;

        for c in 0..config.clusters {
            let [primary, secondary] = cluster_tags(c);
            for j in 0..n {
                let m = movie_id(c, j);
                let p = if rng.random_bool(0.85) { 0.95 } else { 0.8 };
                data.tag_scores.push((m, tag_id(primary), p));
                let s = if rng.random_bool(0.5) { 0.9 } else { 0.6 };
                data.tag_scores.push((m, tag_id(secondary), s));
                for g in GLOBAL_TAGS {
                    let r = if rng.random_bool(0.2) { 0.85 } else { 0.3 };
                    data.tag_scores.push((m, tag_id(g), r));
                }
                data.tag_scores.push((m, tag_id("boring"), 0.79));
            }
        }

        for movie in &data.movies {
            let c = cluster_of(movie.movie_id);
            let tag = cluster_tags(c)[0];
            for r in 0..config.reviews_per_movie {
                let mut text = String::new();
                text.push_str(OPENERS[rng.random_range(0..OPENERS.len())]);
                for _ in 0..rng.random_range(0..5) {
                    let s = MIDDLES[rng.random_range(0..MIDDLES.len())].replace("{tag}", tag);
                    let _ = write!(text, " {s}");
                }
                let _ = write!(text, " {}", CLOSERS[rng.random_range(0..CLOSERS.len())]);
                let movie_ref = if r % 2 == 0 {
                    MovieRef::Id { movie_id: movie.movie_id }
                } else {
                    MovieRef::Title { title: movie.title_with_year.clone() }
                };
                data.reviews.push(Review::new(movie_ref, text));
            }
        }

        data.redial_lines = redial_lines(config.dialogues, &data.movies, &mut rng);
        data
    }

    pub fn tag_relevance(&self) -> Vec<TagRelevance> {
        self.tag_scores
            .iter()
            .map(|(m, t, r)| TagRelevance {
                movie_id: *m,
                tag_name: self.tag_names[(*t - 1) as usize].1.clone(),
                relevance: *r,
            })
            .collect()
    }

    /// Writes `movies.csv`, `ratings.csv`, `genome-scores.csv`,
    /// `genome-tags.csv`, `reviews.jsonl` and `redial.jsonl`.
    pub fn write_raw(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut w = csv::Writer::from_path(dir.join("movies.csv"))?;
        w.write_record(["movieId", "title", "genres"])?;
        for m in &self.movies {
            w.write_record([m.movie_id.to_string(), m.title_with_year.clone(), m.genres.join("|")])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("ratings.csv"))?;
        w.write_record(["userId", "movieId", "rating", "timestamp"])?;
        for r in &self.ratings {
            w.write_record([
                r.user_id.to_string(),
                r.movie_id.to_string(),
                format!("{:.1}", r.rating),
                r.timestamp.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("genome-tags.csv"))?;
        w.write_record(["tagId", "tag"])?;
        for (id, name) in &self.tag_names {
            w.write_record([id.to_string(), name.clone()])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("genome-scores.csv"))?;
        w.write_record(["movieId", "tagId", "relevance"])?;
        for (m, t, r) in &self.tag_scores {
            w.write_record([m.to_string(), t.to_string(), format!("{r}")])?;
        }
        w.flush()?;

        #[derive(serde::Serialize)]
        struct RawReview<'a> {
            #[serde(flatten)]
            movie: &'a MovieRef,
            text: &'a str,
        }
        let raw: Vec<RawReview> = self
            .reviews
            .iter()
            .map(|r| RawReview { movie: &r.movie, text: &r.text })
            .collect();
        crate::jsonl::write(&dir.join("reviews.jsonl"), &raw)?;

        let mut text = self.redial_lines.join("\n");
        text.push('\n');
        let path = dir.join("redial.jsonl");
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    }
}

const SEEKER_LINES: &[&str] = &[
    "Hi! I'm looking for something to watch tonight.",
    "I really liked @{m}. Anything similar?",
    "Oh, I've seen that one. I loved it.",
    "Not really my thing. What else?",
    "Thanks, I'll check it out!",
];

const RECOMMENDER_LINES: &[&str] = &[
    "Hello! What kind of movies do you like?",
    "Have you seen @{m}? It's great.",
    "You might also enjoy @{m} or @{n}.",
    "If you liked that, try @{m}.",
    "Enjoy your movie night!",
];

fn redial_lines(count: usize, movies: &[MovieRecord], rng: &mut ChaCha8Rng) -> Vec<String> {
    let (seeker, recommender) = (101i64, 202i64);
    (0..count)
        .map(|i| {
            let turns = rng.random_range(2..=9);
            let mut mentions = serde_json::Map::new();
            let mut messages = Vec::new();
            for t in 0..turns {
                let from_seeker = if t == 0 { rng.random_bool(0.7) } else { rng.random_bool(0.5) };
                let pool = if from_seeker { SEEKER_LINES } else { RECOMMENDER_LINES };
                let mut text = pool[rng.random_range(0..pool.len())].to_string();
                for slot in ["{m}", "{n}"] {
                    if text.contains(slot) {
                        let movie = &movies[rng.random_range(0..movies.len())];
                        mentions.insert(
                            movie.movie_id.to_string(),
                            serde_json::Value::String(movie.title_with_year.clone()),
                        );
                        text = text.replace(slot, &movie.movie_id.to_string());
                    }
                }
                messages.push(serde_json::json!({
                    "senderWorkerId": if from_seeker { seeker } else { recommender },
                    "text": text,
                }));
            }
            serde_json::json!({
                "conversationId": (20000 + i).to_string(),
                "initiatorWorkerId": seeker,
                "respondentWorkerId": recommender,
                "movieMentions": mentions,
                "messages": messages,
                "initiatorQuestions": {},
                "respondentQuestions": {},
            })
            .to_string()
        })
        .collect()
}

/// Implicit-feedback pairs with `blocks` disjoint user/item cliques. Each
/// user likes each item of its block with probability `density`.
pub fn block_pairs(blocks: usize, users_per_block: usize, items_per_block: usize, density: f64, seed: u64) -> Vec<(u32, u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for b in 0..blocks {
        for u in 0..users_per_block {
            let user = (b * users_per_block + u) as u32;
            for i in 0..items_per_block {
                if rng.random_bool(density) {
                    pairs.push((user, (b * 1000 + i) as u32));
                }
            }
        }
    }
    pairs
}
