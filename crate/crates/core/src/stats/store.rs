//! The statistics store: everything probe generation, the composite scorer
//! and the chat service need, persisted as one directory.
//!
//! ```text
//! meta.json            configuration and summary counts
//! catalog.jsonl        MovieRecord per line
//! windows.jsonl        LikedWindow per line
//! cooccurrence.jsonl   {"a","b","count"} per unordered pair, a < b
//! popularity.jsonl     {"movie_id","count"}
//! rankings.jsonl       {"movie_id","neighbors":[{"movie_id","pmi2","count"}]}
//! tags.jsonl           {"movie_id","tags":[...]}
//! reviews.jsonl        Review per line
//! mf.bin / mf.json     optional factor model (see MfModel::write_binary)
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    CooccurrenceTable, MfModel, Neighbor, PairCount, PmiRanking, PopularityConfig, PopularityIndex, TagIndex,
    TAG_RELEVANCE_ABOVE,
};
use crate::corpus::{liked_windows, LikedWindow};
use crate::ingest::{Catalog, MovieRecord, RatingEvent, Review, TagRelevance};
use crate::{jsonl, Error, Execution, Result};

pub(crate) const MF_BIN: &str = "mf.bin";
pub(crate) const MF_JSON: &str = "mf.json";
const META: &str = "meta.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub popularity: PopularityConfig,
    pub ranking_k: usize,
    pub tag_relevance_above: f32,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            popularity: PopularityConfig::default(),
            ranking_k: 10,
            tag_relevance_above: TAG_RELEVANCE_ABOVE,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StoreInputs {
    pub movies: Vec<MovieRecord>,
    pub ratings: Vec<RatingEvent>,
    pub tag_relevance: Vec<TagRelevance>,
    pub reviews: Vec<Review>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    config: StatsConfig,
    movies: usize,
    windows: usize,
    pair_events: u64,
    distinct_pairs: usize,
    eligible: usize,
    top_decile: usize,
    tags: usize,
    tag_associations: usize,
    reviews: usize,
}

#[derive(Debug, Clone)]
pub struct StatsStore {
    pub config: StatsConfig,
    pub catalog: Catalog,
    pub windows: Vec<LikedWindow>,
    pub cooccurrence: CooccurrenceTable,
    pub popularity: PopularityIndex,
    pub ranking: PmiRanking,
    pub tags: TagIndex,
    pub reviews: Vec<Review>,
    pub mf: Option<MfModel>,
}

impl StatsStore {
    pub fn build(inputs: StoreInputs, config: StatsConfig, exec: Execution) -> Self {
        let catalog = Catalog::new(inputs.movies);
        let windows = liked_windows(&inputs.ratings, Some(&catalog), exec);
        let tags = TagIndex::from_relevance(&inputs.tag_relevance, config.tag_relevance_above);
        Self::from_windows(catalog, windows, tags, inputs.reviews, config, exec)
    }

    pub fn from_windows(
        catalog: Catalog,
        windows: Vec<LikedWindow>,
        tags: TagIndex,
        reviews: Vec<Review>,
        config: StatsConfig,
        exec: Execution,
    ) -> Self {
        let cooccurrence = CooccurrenceTable::build(&windows, exec);
        let popularity = PopularityIndex::build(&windows, config.popularity);
        let ranking = PmiRanking::build(&cooccurrence, &popularity, &catalog, config.ranking_k, exec);
        StatsStore {
            config,
            catalog,
            windows,
            cooccurrence,
            popularity,
            ranking,
            tags,
            reviews,
            mf: None,
        }
    }

    /// Distinct `(user, movie)` likes from the windows, the MF training data.
    pub fn liked_pairs(&self) -> Vec<(u32, u32)> {
        let mut pairs: Vec<(u32, u32)> = self
            .windows
            .iter()
            .flat_map(|w| w.movies.iter().map(move |m| (w.user_id, *m)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    pub fn lower_title(&self, movie: u32) -> String {
        self.catalog
            .lower_title(movie)
            .unwrap_or_else(|| format!("movie {movie}"))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let movies: Vec<&MovieRecord> = self.catalog.movies().collect();
        jsonl::write(&dir.join("catalog.jsonl"), &movies)?;
        jsonl::write(&dir.join("windows.jsonl"), &self.windows)?;
        jsonl::write(&dir.join("cooccurrence.jsonl"), &self.cooccurrence.sorted_pairs())?;

        #[derive(Serialize)]
        struct Pop {
            movie_id: u32,
            count: u64,
        }
        let pop: Vec<Pop> = self
            .popularity
            .sorted_counts()
            .into_iter()
            .map(|(movie_id, count)| Pop { movie_id, count })
            .collect();
        jsonl::write(&dir.join("popularity.jsonl"), &pop)?;

        #[derive(Serialize)]
        struct Ranked<'a> {
            movie_id: u32,
            neighbors: &'a [Neighbor],
        }
        let ranked: Vec<Ranked> = self
            .ranking
            .iter()
            .map(|(movie_id, neighbors)| Ranked { movie_id, neighbors })
            .collect();
        jsonl::write(&dir.join("rankings.jsonl"), &ranked)?;

        #[derive(Serialize)]
        struct Tagged<'a> {
            movie_id: u32,
            tags: Vec<&'a str>,
        }
        let tagged: Vec<Tagged> = self
            .tags
            .movies()
            .map(|(movie_id, tags)| Tagged {
                movie_id,
                tags: tags.iter().map(String::as_str).collect(),
            })
            .collect();
        jsonl::write(&dir.join("tags.jsonl"), &tagged)?;
        jsonl::write(&dir.join("reviews.jsonl"), &self.reviews)?;

        if let Some(mf) = &self.mf {
            mf.save(dir)?;
        }
        jsonl::write_json(
            &dir.join(META),
            &Meta {
                config: self.config,
                movies: self.catalog.len(),
                windows: self.windows.len(),
                pair_events: self.cooccurrence.total(),
                distinct_pairs: self.cooccurrence.pair_len(),
                eligible: self.popularity.eligible().len(),
                top_decile: self.popularity.top_decile().len(),
                tags: self.tags.tag_count(),
                tag_associations: self.tags.association_count(),
                reviews: self.reviews.len(),
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.join(META).is_file() {
            return Err(Error::Store(format!("no statistics store at {}", dir.display())));
        }
        let meta: Meta = jsonl::read_json(&dir.join(META))?;
        let config = meta.config;
        let catalog = Catalog::new(jsonl::read::<MovieRecord>(&dir.join("catalog.jsonl"))?);
        let windows: Vec<LikedWindow> = jsonl::read(&dir.join("windows.jsonl"))?;
        let cooccurrence = CooccurrenceTable::from_pairs(jsonl::read::<PairCount>(&dir.join("cooccurrence.jsonl"))?);

        #[derive(Deserialize)]
        struct Pop {
            movie_id: u32,
            count: u64,
        }
        let counts: HashMap<u32, u64> = jsonl::read::<Pop>(&dir.join("popularity.jsonl"))?
            .into_iter()
            .map(|p| (p.movie_id, p.count))
            .collect();
        let popularity = PopularityIndex::from_counts(counts, config.popularity);

        #[derive(Deserialize)]
        struct Ranked {
            movie_id: u32,
            neighbors: Vec<Neighbor>,
        }
        let lists: BTreeMap<u32, Vec<Neighbor>> = jsonl::read::<Ranked>(&dir.join("rankings.jsonl"))?
            .into_iter()
            .map(|r| (r.movie_id, r.neighbors))
            .collect();
        let ranking = PmiRanking::from_lists(config.ranking_k, lists);

        #[derive(Deserialize)]
        struct Tagged {
            movie_id: u32,
            tags: Vec<String>,
        }
        let mut tags = TagIndex::default();
        for t in jsonl::read::<Tagged>(&dir.join("tags.jsonl"))? {
            for tag in &t.tags {
                tags.insert(t.movie_id, tag);
            }
        }
        let reviews: Vec<Review> = jsonl::read(&dir.join("reviews.jsonl"))?;
        let mf = if dir.join(MF_BIN).is_file() {
            Some(MfModel::load(dir)?)
        } else {
            None
        };
        Ok(StatsStore {
            config,
            catalog,
            windows,
            cooccurrence,
            popularity,
            ranking,
            tags,
            reviews,
            mf,
        })
    }
}
