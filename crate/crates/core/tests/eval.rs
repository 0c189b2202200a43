mod common;

use std::collections::HashSet;

use crs_core::eval::{
    bleu, bleu_n, mask_titles, mentions, recall_end_to_end, run_probe_suite, summary_table, Dialogue, EvalReport,
    SuiteOptions,
};
use crs_core::probes::{generate_all, ProbeCase, ProbeConfig, ProbeFamily};
use crs_core::scoring::{ScoreError, ScoreResult, SequenceScorer};
use crs_core::Execution;
use proptest::prelude::*;

/// Scores through an arbitrary function of (input, target).
struct FnScorer<F>(F);

impl<F: Fn(&str, &str) -> Result<f64, ScoreError> + Send + Sync> SequenceScorer for FnScorer<F> {
    fn backend_id(&self) -> &str {
        "fn"
    }

    fn score(&self, input: &str, target: &str) -> Result<ScoreResult, ScoreError> {
        ScoreResult::new((self.0)(input, target)?, "fn")
    }
}

fn probes() -> Vec<ProbeCase> {
    let store = common::store(&common::synth());
    generate_all(&store, &ProbeConfig::default(), Execution::Parallel).probes
}

fn positives(probes: &[ProbeCase], prefix: &str) -> HashSet<(String, String)> {
    probes
        .iter()
        .map(|p| {
            if p.family.compares_targets() {
                (format!("{prefix}{}", p.inputs[0]), p.targets[p.positive_index].clone())
            } else {
                (format!("{prefix}{}", p.inputs[p.positive_index]), p.targets[0].clone())
            }
        })
        .collect()
}

#[test]
fn oracle_constant_and_failing_scorers() {
    let probes = probes();
    let opts = SuiteOptions::default();
    let pos = positives(&probes, &opts.task_prefix);
    let oracle = FnScorer(|i: &str, t: &str| Ok(if pos.contains(&(i.to_string(), t.to_string())) { -1.0 } else { -2.0 }));
    let r = run_probe_suite(&probes, &oracle, &opts).unwrap();
    assert_eq!(r.families.len(), 4);
    // Synthetic reviews can repeat word for word, so a negative pair may
    // also be some other probe's positive. Only those may tie.
    let ambiguous = probes
        .iter()
        .filter(|p| {
            let neg = 1 - p.positive_index;
            let pair = if p.family.compares_targets() {
                (format!("{}{}", opts.task_prefix, p.inputs[0]), p.targets[neg].clone())
            } else {
                (format!("{}{}", opts.task_prefix, p.inputs[neg]), p.targets[0].clone())
            };
            pos.contains(&pair)
        })
        .count() as u64;
    assert_eq!(r.families.values().map(|f| f.ties).sum::<u64>(), ambiguous);
    assert!(r.families.values().all(|f| f.failures() == 0));
    assert_eq!(r.families.values().map(|f| f.total()).sum::<u64>(), probes.len() as u64);

    let constant = FnScorer(|_: &str, _: &str| Ok(-5.0));
    let r = run_probe_suite(&probes, &constant, &opts).unwrap();
    assert!(r.families.values().all(|f| f.score == 0.0 && f.ties == f.scored && f.failures() == 0));

    let failing = FnScorer(|_: &str, _: &str| Err(ScoreError::Unavailable("down".into())));
    let r = run_probe_suite(&probes, &failing, &opts).unwrap();
    assert!(r.families.values().all(|f| f.scored == 0 && f.score == 0.0 && f.unscored > 0));
    assert_eq!(r.errors.len(), 4);

    assert!(run_probe_suite(&[], &constant, &opts).is_err());
}

#[test]
fn prefix_is_prepended_to_inputs() {
    let probes = probes();
    let seen = std::sync::Mutex::new(Vec::new());
    let spy = FnScorer(|i: &str, _: &str| {
        seen.lock().unwrap().push(i.to_string());
        Ok(0.0)
    });
    run_probe_suite(&probes[..3], &spy, &SuiteOptions::default()).unwrap();
    assert!(seen.lock().unwrap().iter().all(|i| i.starts_with("redial conversation: [user]")));
}

#[test]
fn report_json_and_table() {
    let probes = probes();
    let r = run_probe_suite(&probes, &FnScorer(|_: &str, t: &str| Ok(-(t.len() as f64))), &SuiteOptions::default()).unwrap();
    let report = EvalReport::new("fn", 13, 1_700_000_000).with_probes(r);
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["seed"], 13);
    for f in ProbeFamily::ALL {
        assert!(json["probes"][f.to_string()]["score"].is_number());
    }
    let table = summary_table(&[report]);
    assert!(table.lines().next().unwrap().contains("rec probe"));
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn masking_and_mentions() {
    assert_eq!(mask_titles("see @ up (2009) @ now").unwrap(), "see __unk__ now");
    assert!(mask_titles("see @ up").is_err());
    assert_eq!(mentions("a @ Up  (2009) @ and @ heat @ then @ dangling"), ["up (2009)", "heat"]);
}

#[test]
fn recall_pools_over_the_corpus() {
    let d = |id: &str, turns: &[&str]| Dialogue {
        conversation_id: id.into(),
        turns: turns.iter().map(|s| s.to_string()).collect(),
    };
    let reference = [d("1", &["try @ a @"]), d("2", &["@ b @ or @ c @"])];
    let generated = [d("1", &["@ a @ or @ x @"]), d("2", &["@ c @"])];
    let r = recall_end_to_end(&generated, &reference).unwrap();
    assert_eq!((r.matched, r.generated), (2, 3));
    assert!((r.percent - 200.0 / 3.0).abs() < 1e-12);

    let empty = recall_end_to_end(&[d("1", &["no titles"])], &reference).unwrap();
    assert!(empty.zero_denominator);
    assert_eq!(empty.percent, 0.0);
    assert!(recall_end_to_end(&[d("9", &["@ a @"])], &reference).is_err());
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-f]{1,3}", 4..12).prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn bleu_of_identical_corpora_is_100(c in prop::collection::vec(sentence(), 1..6)) {
        prop_assert!((bleu(&c, &c).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn bleu_ignores_corpus_order(
        pairs in prop::collection::vec((sentence(), sentence()), 1..8),
        rot in 0usize..8,
    ) {
        let (c, r): (Vec<String>, Vec<String>) = pairs.iter().cloned().unzip();
        let k = rot % pairs.len();
        let mut pc = c.clone();
        let mut pr = r.clone();
        pc.rotate_left(k);
        pr.rotate_left(k);
        let a = bleu(&c, &r).unwrap();
        prop_assert!((0.0..=100.0).contains(&a));
        prop_assert!((a - bleu(&pc, &pr).unwrap()).abs() < 1e-9);
        prop_assert!(bleu_n(&c, &r, 1).unwrap() >= 0.0);
    }

    #[test]
    fn recall_matched_never_exceeds_generated(
        refs in prop::collection::vec("[a-c]", 0..4),
        gens in prop::collection::vec("[a-e]", 0..6),
    ) {
        let wrap = |ts: &[String]| ts.iter().map(|t| format!("@ {t} @")).collect::<Vec<_>>();
        let reference = [Dialogue { conversation_id: "c".into(), turns: wrap(&refs) }];
        let generated = [Dialogue { conversation_id: "c".into(), turns: wrap(&gens) }];
        let r = recall_end_to_end(&generated, &reference).unwrap();
        prop_assert!(r.matched <= r.generated);
        prop_assert!((0.0..=100.0).contains(&r.percent));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn suite_is_invariant_to_order_and_monotone_transforms(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let mut probes = probes();
        probes.truncate(300);
        let base = |i: &str, t: &str| -(((i.len() * 7 + t.len() * 3) % 11) as f64);
        let a = run_probe_suite(&probes, &FnScorer(|i: &str, t: &str| Ok(base(i, t))), &SuiteOptions::default()).unwrap();
        let mut shuffled = probes.clone();
        let n = shuffled.len();
        for i in 0..n {
            let j = (seed.wrapping_mul(i as u64 + 1) % n as u64) as usize;
            shuffled.swap(i, j);
        }
        let b = run_probe_suite(
            &shuffled,
            &FnScorer(|i: &str, t: &str| Ok(scale * base(i, t).powi(3) - 3.0)),
            &SuiteOptions { exec: Execution::Sequential, ..SuiteOptions::default() },
        )
        .unwrap();
        prop_assert_eq!(a.families, b.families);
    }
}
