use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::LikedWindow;
use crate::{par, Execution};

/// One unordered pair with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCount {
    pub a: u32,
    pub b: u32,
    pub count: u64,
}

/// Unordered pair counts over liked windows.
///
/// Every unordered pair of distinct movies inside a window is one pair
/// event. `marginal(a)` counts the pair events `a` takes part in, so
/// `Σ_a marginal(a) = 2 · total()`.
#[derive(Debug, Clone, Default)]
pub struct CooccurrenceTable {
    pairs: HashMap<(u32, u32), u64>,
    marginals: HashMap<u32, u64>,
    neighbors: HashMap<u32, Vec<u32>>,
    total: u64,
    pmi_range: Option<(f64, f64)>,
}

fn key(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl CooccurrenceTable {
    pub fn build(windows: &[LikedWindow], exec: Execution) -> Self {
        let pairs = par::map_reduce(
            exec,
            windows,
            HashMap::<(u32, u32), u64>::new,
            |acc, window| {
                for (i, &a) in window.movies.iter().enumerate() {
                    for &b in &window.movies[i + 1..] {
                        if a != b {
                            *acc.entry(key(a, b)).or_insert(0) += 1;
                        }
                    }
                }
            },
            |mut left, right| {
                if left.len() < right.len() {
                    return merge_into(right, left);
                }
                for (k, v) in right {
                    *left.entry(k).or_insert(0) += v;
                }
                left
            },
        );
        Self::from_pairs(pairs.into_iter().map(|((a, b), count)| PairCount { a, b, count }))
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = PairCount>) -> Self {
        let mut table = CooccurrenceTable::default();
        for p in pairs {
            if p.count == 0 || p.a == p.b {
                continue;
            }
            *table.pairs.entry(key(p.a, p.b)).or_insert(0) += p.count;
        }
        for (&(a, b), &c) in &table.pairs {
            *table.marginals.entry(a).or_insert(0) += c;
            *table.marginals.entry(b).or_insert(0) += c;
            table.neighbors.entry(a).or_default().push(b);
            table.neighbors.entry(b).or_default().push(a);
            table.total += c;
        }
        for list in table.neighbors.values_mut() {
            list.sort_unstable();
        }
        table.pmi_range = table.compute_pmi_range();
        table
    }

    pub fn count(&self, a: u32, b: u32) -> u64 {
        self.pairs.get(&key(a, b)).copied().unwrap_or(0)
    }

    pub fn marginal(&self, a: u32) -> u64 {
        self.marginals.get(&a).copied().unwrap_or(0)
    }

    /// Total pair events T.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn pair_len(&self) -> usize {
        self.pairs.len()
    }

    /// Movies that co-occur with `a` at least once, ascending by id.
    pub fn neighbors(&self, a: u32) -> &[u32] {
        self.neighbors.get(&a).map_or(&[], Vec::as_slice)
    }

    pub fn movies(&self) -> impl Iterator<Item = u32> + '_ {
        self.marginals.keys().copied()
    }

    /// Pairs sorted by `(a, b)`.
    pub fn sorted_pairs(&self) -> Vec<PairCount> {
        let mut out: Vec<PairCount> = self
            .pairs
            .iter()
            .map(|(&(a, b), &count)| PairCount { a, b, count })
            .collect();
        out.sort_unstable_by_key(|p| (p.a, p.b));
        out
    }

    /// PMI² of a pair, `ln(p(a,b)² / (p(a)·p(b)))` with `p(a,b) = c(a,b)/T`
    /// and `p(a) = c(a)/(2T)`. `None` when the pair never co-occurs.
    pub fn pmi2(&self, a: u32, b: u32) -> Option<f64> {
        let c = self.count(a, b);
        if c == 0 {
            return None;
        }
        let t = self.total as f64;
        let p_ab = c as f64 / t;
        let p_a = self.marginal(a) as f64 / (2.0 * t);
        let p_b = self.marginal(b) as f64 / (2.0 * t);
        Some((p_ab * p_ab / (p_a * p_b)).ln())
    }

    /// Smallest and largest PMI² over all co-occurring pairs.
    pub fn pmi_range(&self) -> Option<(f64, f64)> {
        self.pmi_range
    }

    /// PMI² rescaled to [0, 1] over the table's range; 0 for pairs that
    /// never co-occur. A table whose pairs all share one value maps them to 1.
    pub fn normalized_pmi2(&self, a: u32, b: u32) -> f64 {
        match (self.pmi2(a, b), self.pmi_range) {
            (Some(v), Some((lo, hi))) if hi > lo => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            (Some(_), Some(_)) => 1.0,
            _ => 0.0,
        }
    }

    fn compute_pmi_range(&self) -> Option<(f64, f64)> {
        self.pairs.keys().filter_map(|&(a, b)| self.pmi2(a, b)).fold(None, |acc, v| {
            Some(match acc {
                None => (v, v),
                Some((lo, hi)) => (lo.min(v), hi.max(v)),
            })
        })
    }
}

fn merge_into(mut big: HashMap<(u32, u32), u64>, small: HashMap<(u32, u32), u64>) -> HashMap<(u32, u32), u64> {
    for (k, v) in small {
        *big.entry(k).or_insert(0) += v;
    }
    big
}

/// PMI² straight from raw counts, `ln(4·c(a,b)² / (c(a)·c(b)))`.
pub fn pmi2_from_counts(pair: u64, marginal_a: u64, marginal_b: u64) -> f64 {
    (4.0 * (pair as f64).powi(2) / (marginal_a as f64 * marginal_b as f64)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(movies: &[u32]) -> LikedWindow {
        LikedWindow { user_id: 0, movies: movies.to_vec() }
    }

    #[test]
    fn single_pair() {
        let t = CooccurrenceTable::build(&[window(&[1, 2])], Execution::Sequential);
        assert_eq!((t.count(1, 2), t.marginal(1), t.marginal(2), t.total()), (1, 1, 1, 1));
        assert!((t.pmi2(1, 2).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!(t.pmi2(1, 3).is_none());
        assert_eq!(t.normalized_pmi2(2, 1), 1.0);
    }

    #[test]
    fn ten_movies_give_45_events() {
        let t = CooccurrenceTable::build(&[window(&(1..=10).collect::<Vec<_>>())], Execution::Parallel);
        assert_eq!(t.total(), 45);
        assert_eq!(t.movies().map(|m| t.marginal(m)).sum::<u64>(), 90);
    }

    #[test]
    fn symmetric() {
        let ws = vec![window(&[1, 2, 3]), window(&[2, 3, 4]), window(&[1, 3])];
        let t = CooccurrenceTable::build(&ws, Execution::Sequential);
        for a in 1..=4 {
            for b in 1..=4 {
                assert_eq!(t.pmi2(a, b), t.pmi2(b, a));
                assert_eq!(t.count(a, b), t.count(b, a));
            }
        }
        assert_eq!(t.neighbors(3), &[1, 2, 4]);
    }
}
