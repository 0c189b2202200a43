use std::collections::{BTreeMap, BTreeSet};

use crate::ingest::TagRelevance;

pub const TAG_RELEVANCE_ABOVE: f32 = 0.8;

/// Movie → tags with relevance strictly above the threshold, and its
/// transpose tag → movies. Tags are stored lowercased.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagIndex {
    by_movie: BTreeMap<u32, BTreeSet<String>>,
    by_tag: BTreeMap<String, BTreeSet<u32>>,
}

impl TagIndex {
    pub fn from_relevance<'a>(records: impl IntoIterator<Item = &'a TagRelevance>, threshold: f32) -> Self {
        Self::from_pairs(
            records
                .into_iter()
                .filter(|r| r.relevance > threshold)
                .map(|r| (r.movie_id, r.tag_name.as_str())),
        )
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (u32, &'a str)>) -> Self {
        let mut index = TagIndex::default();
        for (movie, tag) in pairs {
            index.insert(movie, tag);
        }
        index
    }

    pub fn insert(&mut self, movie: u32, tag: &str) {
        let tag = tag.trim().to_lowercase();
        if tag.is_empty() {
            return;
        }
        self.by_movie.entry(movie).or_default().insert(tag.clone());
        self.by_tag.entry(tag).or_default().insert(movie);
    }

    pub fn tags_of(&self, movie: u32) -> Option<&BTreeSet<String>> {
        self.by_movie.get(&movie)
    }

    pub fn movies_with(&self, tag: &str) -> Option<&BTreeSet<u32>> {
        self.by_tag.get(tag)
    }

    pub fn has(&self, movie: u32, tag: &str) -> bool {
        self.by_movie.get(&movie).is_some_and(|t| t.contains(tag))
    }

    pub fn movies(&self) -> impl Iterator<Item = (u32, &BTreeSet<String>)> {
        self.by_movie.iter().map(|(m, t)| (*m, t))
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.by_tag.keys().map(String::as_str)
    }

    pub fn tag_count(&self) -> usize {
        self.by_tag.len()
    }

    pub fn association_count(&self) -> usize {
        self.by_movie.values().map(BTreeSet::len).sum()
    }

    /// Checks that the two maps are transposes of each other.
    pub fn is_consistent(&self) -> bool {
        let forward = self
            .by_movie
            .iter()
            .all(|(m, tags)| tags.iter().all(|t| self.by_tag.get(t).is_some_and(|ms| ms.contains(m))));
        let backward = self
            .by_tag
            .iter()
            .all(|(t, ms)| ms.iter().all(|m| self.by_movie.get(m).is_some_and(|ts| ts.contains(t))));
        forward && backward
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_strict() {
        let rows = vec![
            TagRelevance { movie_id: 1, tag_name: "Drama".into(), relevance: 0.8 },
            TagRelevance { movie_id: 2, tag_name: "Drama".into(), relevance: 0.81 },
            TagRelevance { movie_id: 2, tag_name: "vampire".into(), relevance: 0.79 },
        ];
        let index = TagIndex::from_relevance(&rows, TAG_RELEVANCE_ABOVE);
        assert!(index.tags_of(1).is_none());
        assert!(index.has(2, "drama"));
        assert!(!index.has(2, "vampire"));
        assert!(index.is_consistent());
        assert_eq!(index.association_count(), 1);
    }
}
