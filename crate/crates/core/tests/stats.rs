mod common;

use std::collections::BTreeSet;

use crs_core::corpus::LikedWindow;
use crs_core::stats::{
    pmi2_from_counts, top_related, train_mf, CooccurrenceTable, MfConfig, MfModel, Objective, PopularityConfig,
    PopularityIndex, Sample, TagIndex, TrainingSet,
};
use crs_core::synth::block_pairs;
use crs_core::{Error, Execution};
use proptest::prelude::*;

fn windows_strategy() -> impl Strategy<Value = Vec<LikedWindow>> {
    prop::collection::vec(prop::collection::btree_set(1u32..30, 2..10), 1..40).prop_map(|sets| {
        sets.into_iter()
            .enumerate()
            .map(|(u, s)| LikedWindow {
                user_id: u as u32,
                movies: s.into_iter().collect(),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn cooccurrence_matches_recount(windows in windows_strategy()) {
        let table = CooccurrenceTable::build(&windows, Execution::Parallel);
        let (pairs, marginal, total) = common::recount(&windows);
        prop_assert_eq!(table.total(), total);
        prop_assert_eq!(table.pair_len(), pairs.len());
        for ((a, b), c) in &pairs {
            prop_assert_eq!(table.count(*a, *b), *c);
            prop_assert_eq!(table.count(*b, *a), *c);
            let want = ((*c as f64 / total as f64).powi(2)
                / ((marginal[a] as f64 / (2.0 * total as f64)) * (marginal[b] as f64 / (2.0 * total as f64))))
                .ln();
            let got = table.pmi2(*a, *b).unwrap();
            prop_assert!((got - want).abs() <= 1e-9);
            prop_assert_eq!(table.pmi2(*b, *a), Some(got));
        }
    }

    #[test]
    fn parallel_and_sequential_tables_agree(windows in windows_strategy()) {
        let p = CooccurrenceTable::build(&windows, Execution::Parallel);
        let s = CooccurrenceTable::build(&windows, Execution::Sequential);
        prop_assert_eq!(p.sorted_pairs(), s.sorted_pairs());
    }

    #[test]
    fn normalized_pmi_is_a_unit_interval(windows in windows_strategy()) {
        let table = CooccurrenceTable::build(&windows, Execution::Sequential);
        for p in table.sorted_pairs() {
            let v = table.normalized_pmi2(p.a, p.b);
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(table.normalized_pmi2(1000, 1001), 0.0);
    }

    #[test]
    fn top_decile_is_a_ceiling_tenth_of_eligible(counts in prop::collection::hash_map(1u32..500, 0u64..100, 0..200)) {
        let idx = PopularityIndex::from_counts(counts.clone(), PopularityConfig::default());
        let mut eligible: Vec<(u32, u64)> = counts.iter().filter(|(_, c)| **c > 30).map(|(m, c)| (*m, *c)).collect();
        eligible.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
        let n = (eligible.len() as f64 * 0.1).ceil() as usize;
        let want: Vec<u32> = eligible.iter().take(n).map(|e| e.0).collect();
        prop_assert_eq!(idx.top_decile(), &want[..]);
        prop_assert_eq!(idx.eligible().len(), eligible.len());
        for m in &want {
            prop_assert!(idx.in_top_decile(*m));
            prop_assert!(idx.is_eligible(*m));
        }
    }

    #[test]
    fn tag_index_is_consistent(pairs in prop::collection::vec((1u32..50, "[a-c]{1,3}"), 0..80)) {
        let idx = TagIndex::from_pairs(pairs.iter().map(|(m, t)| (*m, t.as_str())));
        prop_assert!(idx.is_consistent());
        for (m, t) in &pairs {
            prop_assert!(idx.has(*m, t));
            prop_assert!(idx.movies_with(t).unwrap().contains(m));
        }
    }
}

#[test]
fn pmi2_from_counts_matches_definition() {
    // c = 2, c_a = 4, c_b = 3 in T = 5 pair events.
    let t = 5.0f64;
    let want = ((2.0 / t).powi(2) / ((4.0 / (2.0 * t)) * (3.0 / (2.0 * t)))).ln();
    assert!((pmi2_from_counts(2, 4, 3) - want).abs() < 1e-12);
}

#[test]
fn top_related_on_synthetic_store() {
    let data = common::synth();
    let store = common::store(&data);
    let mut checked = 0;
    for &q in store.popularity.eligible() {
        let list = top_related(q, 10, &store.cooccurrence, &store.popularity, &store.catalog).unwrap();
        assert!(list.len() <= 10);
        assert!(list.iter().all(|n| n.movie_id != q && store.popularity.is_eligible(n.movie_id)));
        assert!(list.windows(2).all(|w| w[0].pmi2 >= w[1].pmi2));
        assert_eq!(list, store.ranking.related(q));
        // Everything left out scores no higher than the last kept neighbor.
        if let Some(last) = list.last() {
            let kept: BTreeSet<u32> = list.iter().map(|n| n.movie_id).collect();
            for &b in store.cooccurrence.neighbors(q) {
                if !kept.contains(&b) && b != q && store.popularity.is_eligible(b) {
                    assert!(store.cooccurrence.pmi2(q, b).unwrap() <= last.pmi2);
                }
            }
        }
        checked += 1;
    }
    assert!(checked > 0);
    let rare = 99_999;
    assert!(matches!(
        top_related(rare, 10, &store.cooccurrence, &store.popularity, &store.catalog),
        Err(Error::NotEligible(99_999))
    ));
}

#[test]
fn planted_clusters_dominate_neighbor_lists() {
    let store = common::store(&common::synth());
    let (mut same, mut total) = (0, 0);
    for (q, list) in store.ranking.iter() {
        for n in list {
            total += 1;
            if crs_core::synth::cluster_of(n.movie_id) == crs_core::synth::cluster_of(q) {
                same += 1;
            }
        }
    }
    assert!(same as f64 / total as f64 > 0.9, "{same}/{total}");
}

#[test]
fn gradient_matches_finite_differences() {
    let samples: Vec<Sample> = (0..5)
        .flat_map(|u| (0..5).map(move |i| Sample { user: u, item: i, label: ((u * 3 + i) % 2) as f64 }))
        .collect();
    let obj = Objective { samples: &samples, dim: 2, regularization: 0.1 };
    let users: Vec<f64> = (0..10).map(|k| ((k * 7 % 11) as f64 - 5.0) / 10.0).collect();
    let items: Vec<f64> = (0..10).map(|k| ((k * 5 % 13) as f64 - 6.0) / 9.0).collect();
    let (gu, gi) = obj.gradient(&users, &items);
    let h = 1e-6;
    for k in 0..10 {
        let mut up = users.clone();
        let mut down = users.clone();
        up[k] += h;
        down[k] -= h;
        let fd = (obj.loss(&up, &items) - obj.loss(&down, &items)) / (2.0 * h);
        assert!((fd - gu[k]).abs() / fd.abs().max(1e-8) < 1e-4, "user {k}: {fd} vs {}", gu[k]);
        let mut up = items.clone();
        let mut down = items.clone();
        up[k] += h;
        down[k] -= h;
        let fd = (obj.loss(&users, &up) - obj.loss(&users, &down)) / (2.0 * h);
        assert!((fd - gi[k]).abs() / fd.abs().max(1e-8) < 1e-4, "item {k}: {fd} vs {}", gi[k]);
    }
}

#[test]
fn mf_loss_decreases_and_model_round_trips() {
    let pairs = block_pairs(3, 20, 10, 0.7, 1);
    let cfg = MfConfig { dim: 8, epochs: 15, ..MfConfig::default() };
    let model = train_mf(&pairs, &cfg).unwrap();
    assert_eq!(model.loss_history.len(), cfg.epochs + 1);
    assert!(model.final_loss().unwrap() < model.loss_history[0]);

    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();
    let back = MfModel::load(dir.path()).unwrap();
    assert_eq!(back.items, model.items);
    assert_eq!(back.users, model.users);
    assert_eq!(back.item_ids, model.item_ids);
    assert_eq!(back.loss_history, model.loss_history);
    assert_eq!(back.config, model.config);
}

#[test]
fn mf_training_is_seeded() {
    let pairs = block_pairs(2, 10, 8, 0.6, 4);
    let cfg = MfConfig { dim: 4, epochs: 5, seed: 9, ..MfConfig::default() };
    let a = train_mf(&pairs, &cfg).unwrap();
    let b = train_mf(&pairs, &cfg).unwrap();
    assert_eq!(a.items, b.items);
    let set = TrainingSet::from_pairs(&pairs, 1, 9);
    let positives = set.samples.iter().filter(|s| s.label == 1.0).count();
    let negatives = set.samples.len() - positives;
    assert_eq!(positives, negatives);
}

#[test]
fn mf_rejects_divergence() {
    let pairs = block_pairs(2, 10, 8, 0.6, 4);
    let cfg = MfConfig { dim: 4, epochs: 50, learning_rate: 1e6, ..MfConfig::default() };
    assert!(matches!(train_mf(&pairs, &cfg), Err(Error::Diverged { .. })));
}

#[test]
fn store_round_trips_through_disk() {
    let store = common::store(&common::synth());
    let dir = tempfile::tempdir().unwrap();
    store.save(dir.path()).unwrap();
    let back = crs_core::stats::StatsStore::load(dir.path()).unwrap();
    assert_eq!(back.windows, store.windows);
    assert_eq!(back.cooccurrence.sorted_pairs(), store.cooccurrence.sorted_pairs());
    assert_eq!(back.popularity.sorted_counts(), store.popularity.sorted_counts());
    assert_eq!(back.ranking, store.ranking);
    assert_eq!(back.reviews, store.reviews);
    assert_eq!(back.tags.association_count(), store.tags.association_count());
    assert!(back.mf.is_none());
    let missing = dir.path().join("nope");
    let err = crs_core::stats::StatsStore::load(&missing).unwrap_err().to_string();
    assert!(err.contains("nope"), "{err}");
}
