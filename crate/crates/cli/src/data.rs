//! Raw dataset directory: `movies.csv`, `ratings.csv`, `genome-scores.csv`,
//! `genome-tags.csv`, `reviews.jsonl`, `redial.jsonl`. Any file may be
//! absent; the commands that need it say so.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use crs_core::ingest::{
    parse_movies, parse_ratings, parse_redial, parse_reviews, parse_tag_genome, MovieRecord, Parsed, RatingEvent,
    RedialConversation, Review, TagRelevance,
};

pub const MOVIES: &str = "movies.csv";
pub const RATINGS: &str = "ratings.csv";
pub const GENOME_SCORES: &str = "genome-scores.csv";
pub const GENOME_TAGS: &str = "genome-tags.csv";
pub const REVIEWS: &str = "reviews.jsonl";
pub const REDIAL: &str = "redial.jsonl";

pub fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn report<T>(what: &str, path: &Path, parsed: Parsed<T>) -> Vec<T> {
    for e in parsed.errors.iter().take(5) {
        tracing::warn!("{}:{}: {}", path.display(), e.line, e.message);
    }
    if !parsed.errors.is_empty() || !parsed.skipped.is_empty() {
        tracing::warn!(
            "{what}: {} records, {} rejected, {} skipped",
            parsed.records.len(),
            parsed.errors.len(),
            parsed.skipped.len()
        );
    }
    parsed.records
}

pub fn load_redial(path: &Path) -> anyhow::Result<Vec<RedialConversation>> {
    let parsed = parse_redial(BufReader::new(open(path)?))?;
    Ok(report("redial", path, parsed))
}

pub fn load_reviews(path: &Path) -> anyhow::Result<Vec<Review>> {
    let parsed = parse_reviews(BufReader::new(open(path)?))?;
    Ok(report("reviews", path, parsed))
}

#[derive(Debug, Default)]
pub struct RawData {
    pub dir: PathBuf,
    pub movies: Option<Vec<MovieRecord>>,
    pub ratings: Option<Vec<RatingEvent>>,
    pub genome: Option<Vec<TagRelevance>>,
    pub reviews: Option<Vec<Review>>,
    pub redial: Option<Vec<RedialConversation>>,
}

impl RawData {
    pub fn load(dir: &Path) -> anyhow::Result<RawData> {
        if !dir.is_dir() {
            bail!("data directory {} does not exist", dir.display());
        }
        let path = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        let mut data = RawData {
            dir: dir.to_path_buf(),
            ..RawData::default()
        };
        if let Some(p) = path(MOVIES) {
            data.movies = Some(report("movies", &p, parse_movies(open(&p)?)?));
        }
        if let Some(p) = path(RATINGS) {
            data.ratings = Some(report("ratings", &p, parse_ratings(open(&p)?)?));
        }
        if let (Some(s), Some(n)) = (path(GENOME_SCORES), path(GENOME_TAGS)) {
            data.genome = Some(report("tag genome", &s, parse_tag_genome(open(&s)?, open(&n)?)?));
        }
        if let Some(p) = path(REVIEWS) {
            data.reviews = Some(load_reviews(&p)?);
        }
        if let Some(p) = path(REDIAL) {
            data.redial = Some(load_redial(&p)?);
        }
        Ok(data)
    }

    pub fn require<'a, T>(&self, field: &'a Option<Vec<T>>, name: &str) -> anyhow::Result<&'a [T]> {
        match field {
            Some(v) => Ok(v),
            None => bail!("{} is missing {name}", self.dir.display()),
        }
    }
}
