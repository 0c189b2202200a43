use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CooccurrenceTable, PopularityIndex};
use crate::ingest::Catalog;
use crate::{par, Error, Execution, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub movie_id: u32,
    pub pmi2: f64,
    pub count: u64,
}

/// The `k` eligible movies with the highest PMI² against `a`, among those
/// that co-occur with it. Ties go to the larger pair count, then to the
/// lexicographically smaller title.
pub fn top_related(
    a: u32,
    k: usize,
    table: &CooccurrenceTable,
    popularity: &PopularityIndex,
    catalog: &Catalog,
) -> Result<Vec<Neighbor>> {
    if !popularity.is_eligible(a) {
        return Err(Error::NotEligible(a));
    }
    let mut candidates: Vec<Neighbor> = table
        .neighbors(a)
        .iter()
        .filter(|b| popularity.is_eligible(**b))
        .filter_map(|&b| {
            table.pmi2(a, b).map(|pmi2| Neighbor {
                movie_id: b,
                pmi2,
                count: table.count(a, b),
            })
        })
        .collect();
    candidates.sort_by(|x, y| {
        y.pmi2
            .partial_cmp(&x.pmi2)
            .unwrap_or(Ordering::Equal)
            .then(y.count.cmp(&x.count))
            .then_with(|| catalog.title(x.movie_id).cmp(&catalog.title(y.movie_id)))
            .then(x.movie_id.cmp(&y.movie_id))
    });
    candidates.truncate(k);
    Ok(candidates)
}

/// Precomputed top-k PMI² neighbor lists for every eligible movie.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PmiRanking {
    k: usize,
    lists: BTreeMap<u32, Vec<Neighbor>>,
}

impl PmiRanking {
    pub fn build(
        table: &CooccurrenceTable,
        popularity: &PopularityIndex,
        catalog: &Catalog,
        k: usize,
        exec: Execution,
    ) -> Self {
        let eligible: Vec<u32> = popularity.eligible().iter().copied().collect();
        let lists = par::map(exec, &eligible, |&a| {
            let list = top_related(a, k, table, popularity, catalog).expect("eligible by construction");
            (a, list)
        });
        PmiRanking {
            k,
            lists: lists.into_iter().collect(),
        }
    }

    pub fn from_lists(k: usize, lists: BTreeMap<u32, Vec<Neighbor>>) -> Self {
        PmiRanking { k, lists }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn related(&self, movie: u32) -> &[Neighbor] {
        self.lists.get(&movie).map_or(&[], Vec::as_slice)
    }

    pub fn is_related(&self, query: u32, candidate: u32) -> bool {
        self.related(query).iter().any(|n| n.movie_id == candidate)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[Neighbor])> {
        self.lists.iter().map(|(m, l)| (*m, l.as_slice()))
    }
}
