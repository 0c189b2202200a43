use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::LikedWindow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopularityConfig {
    /// Probe eligibility requires an occurrence count strictly above this.
    pub eligible_above: u64,
    /// Share of eligible movies forming the negative-sampling pool.
    pub top_fraction: f64,
}

impl Default for PopularityConfig {
    fn default() -> Self {
        PopularityConfig {
            eligible_above: 30,
            top_fraction: 0.1,
        }
    }
}

/// Occurrence counts in liked windows, with the eligible set and the
/// popular pool derived from them.
#[derive(Debug, Clone, Default)]
pub struct PopularityIndex {
    counts: HashMap<u32, u64>,
    eligible: BTreeSet<u32>,
    top: Vec<u32>,
    top_set: BTreeSet<u32>,
    config: PopularityConfig,
}

impl PopularityIndex {
    pub fn build(windows: &[LikedWindow], config: PopularityConfig) -> Self {
        let mut counts: HashMap<u32, u64> = HashMap::new();
        for w in windows {
            for m in &w.movies {
                *counts.entry(*m).or_insert(0) += 1;
            }
        }
        Self::from_counts(counts, config)
    }

    /// Derives the eligible set (count above the threshold) and the top
    /// `⌈fraction · |eligible|⌉` eligible movies by count, ties by lower id.
    pub fn from_counts(counts: HashMap<u32, u64>, config: PopularityConfig) -> Self {
        let eligible: BTreeSet<u32> = counts
            .iter()
            .filter(|(_, c)| **c > config.eligible_above)
            .map(|(m, _)| *m)
            .collect();
        let mut ranked: Vec<u32> = eligible.iter().copied().collect();
        ranked.sort_by(|a, b| counts[b].cmp(&counts[a]).then(a.cmp(b)));
        let size = (config.top_fraction * eligible.len() as f64).ceil() as usize;
        ranked.truncate(size.min(eligible.len()));
        let top_set = ranked.iter().copied().collect();
        PopularityIndex {
            counts,
            eligible,
            top: ranked,
            top_set,
            config,
        }
    }

    pub fn count(&self, movie: u32) -> u64 {
        self.counts.get(&movie).copied().unwrap_or(0)
    }

    pub fn max_count(&self) -> u64 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    pub fn is_eligible(&self, movie: u32) -> bool {
        self.eligible.contains(&movie)
    }

    pub fn eligible(&self) -> &BTreeSet<u32> {
        &self.eligible
    }

    /// Popular pool, most frequent first.
    pub fn top_decile(&self) -> &[u32] {
        &self.top
    }

    pub fn in_top_decile(&self, movie: u32) -> bool {
        self.top_set.contains(&movie)
    }

    pub fn config(&self) -> PopularityConfig {
        self.config
    }

    /// `(movie, count)` sorted by movie id.
    pub fn sorted_counts(&self) -> Vec<(u32, u64)> {
        let mut v: Vec<(u32, u64)> = self.counts.iter().map(|(m, c)| (*m, *c)).collect();
        v.sort_unstable();
        v
    }

    /// `ln(1 + count) / ln(1 + max count)`, in [0, 1].
    pub fn log_prior(&self, movie: u32) -> f64 {
        let max = self.max_count();
        if max == 0 {
            return 0.0;
        }
        (1.0 + self.count(movie) as f64).ln() / (1.0 + max as f64).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eligibility_is_strict_and_decile_rounds_up() {
        let counts: HashMap<u32, u64> = (1..=21).map(|m| (m, 20 + m as u64)).collect();
        let idx = PopularityIndex::from_counts(counts, PopularityConfig::default());
        // counts 21..=41, eligible are those > 30: movies 11..=21
        assert!(!idx.is_eligible(10));
        assert!(idx.is_eligible(11));
        assert_eq!(idx.eligible().len(), 11);
        assert_eq!(idx.top_decile(), &[21, 20]);
        assert!(idx.top_decile().iter().all(|m| idx.is_eligible(*m)));
        assert_eq!(idx.log_prior(21), 1.0);
    }
}
