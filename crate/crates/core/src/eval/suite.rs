use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::probes::{ProbeCase, ProbeFamily};
use crate::scoring::SequenceScorer;
use crate::{Error, Execution, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    /// Prepended to every probe input before scoring.
    pub task_prefix: String,
    pub exec: Execution,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            task_prefix: "redial conversation: ".into(),
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FamilyScore {
    /// successes / scored, 0 when nothing was scored.
    pub score: f64,
    pub successes: u64,
    pub ties: u64,
    pub scored: u64,
    pub unscored: u64,
}

impl FamilyScore {
    pub fn total(&self) -> u64 {
        self.scored + self.unscored
    }

    pub fn failures(&self) -> u64 {
        self.scored - self.successes - self.ties
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSuiteReport {
    pub backend_id: String,
    pub families: BTreeMap<ProbeFamily, FamilyScore>,
    /// First scorer error per family, if any.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub errors: BTreeMap<ProbeFamily, String>,
}

enum Outcome {
    Success,
    Tie,
    Failure,
    Unscored(String),
}

fn pairs_of(probe: &ProbeCase, prefix: &str) -> Result<[(String, String); 2]> {
    let bad = || Error::Invalid(format!("malformed {} probe", probe.family));
    let (pos, neg) = match probe.positive_index {
        0 => (0, 1),
        1 => (1, 0),
        _ => return Err(bad()),
    };
    if probe.family.compares_targets() {
        let input = format!("{prefix}{}", probe.inputs.first().ok_or_else(bad)?);
        let t = |i: usize| probe.targets.get(i).cloned().ok_or_else(bad);
        Ok([(input.clone(), t(pos)?), (input, t(neg)?)])
    } else {
        let target = probe.targets.first().ok_or_else(bad)?.clone();
        let i = |i: usize| probe.inputs.get(i).map(|s| format!("{prefix}{s}")).ok_or_else(bad);
        Ok([(i(pos)?, target.clone()), (i(neg)?, target)])
    }
}

/// Scores every probe: a success when the positive pair's log-likelihood is
/// strictly higher, a tie when the two are equal. Probes whose scoring
/// failed are counted as unscored and left out of the denominator.
pub fn run_probe_suite<S: SequenceScorer + ?Sized>(
    probes: &[ProbeCase],
    scorer: &S,
    options: &SuiteOptions,
) -> Result<ProbeSuiteReport> {
    if probes.is_empty() {
        return Err(Error::Invalid("probe list is empty".into()));
    }
    let mut requests = Vec::with_capacity(probes.len() * 2);
    for p in probes {
        requests.extend(pairs_of(p, &options.task_prefix)?);
    }
    let scores = scorer.score_batch(&requests, options.exec);
    let mut report = ProbeSuiteReport {
        backend_id: scorer.backend_id().to_string(),
        families: BTreeMap::new(),
        errors: BTreeMap::new(),
    };
    for (probe, pair) in probes.iter().zip(scores.chunks(2)) {
        let outcome = match (&pair[0], &pair[1]) {
            (Ok(p), Ok(n)) if p.log_likelihood > n.log_likelihood => Outcome::Success,
            (Ok(p), Ok(n)) if p.log_likelihood == n.log_likelihood => Outcome::Tie,
            (Ok(_), Ok(_)) => Outcome::Failure,
            (Err(e), _) | (_, Err(e)) => Outcome::Unscored(e.to_string()),
        };
        let entry = report.families.entry(probe.family).or_default();
        match outcome {
            Outcome::Success => {
                entry.scored += 1;
                entry.successes += 1;
            }
            Outcome::Tie => {
                entry.scored += 1;
                entry.ties += 1;
            }
            Outcome::Failure => entry.scored += 1,
            Outcome::Unscored(e) => {
                entry.unscored += 1;
                report.errors.entry(probe.family).or_insert(e);
            }
        }
    }
    for s in report.families.values_mut() {
        s.score = if s.scored == 0 { 0.0 } else { s.successes as f64 / s.scored as f64 };
    }
    Ok(report)
}
