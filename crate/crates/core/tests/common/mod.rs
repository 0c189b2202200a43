#![allow(dead_code)]

use std::collections::HashMap;

use crs_core::corpus::LikedWindow;
use crs_core::stats::{StatsConfig, StatsStore, StoreInputs};
use crs_core::synth::{SynthConfig, SynthData};
use crs_core::Execution;

pub fn synth() -> SynthData {
    SynthData::generate(&SynthConfig::default())
}

pub fn store(data: &SynthData) -> StatsStore {
    StatsStore::build(
        StoreInputs {
            movies: data.movies.clone(),
            ratings: data.ratings.clone(),
            tag_relevance: data.tag_relevance(),
            reviews: data.reviews.clone(),
        },
        StatsConfig::default(),
        Execution::Parallel,
    )
}

/// Pair counts, per-movie marginals and the pair total.
pub type Recount = (HashMap<(u32, u32), u64>, HashMap<u32, u64>, u64);

/// Unordered pair counts recounted by looping over every window.
pub fn recount(windows: &[LikedWindow]) -> Recount {
    let mut pairs = HashMap::new();
    let mut marginal = HashMap::new();
    let mut total = 0;
    for w in windows {
        for (i, a) in w.movies.iter().enumerate() {
            for b in &w.movies[i + 1..] {
                *pairs.entry((*a.min(b), *a.max(b))).or_insert(0) += 1;
                *marginal.entry(*a).or_insert(0) += 1;
                *marginal.entry(*b).or_insert(0) += 1;
                total += 1;
            }
        }
    }
    (pairs, marginal, total)
}
