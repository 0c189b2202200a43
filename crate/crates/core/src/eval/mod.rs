//! Dialogue metrics (title-masked BLEU, end-to-end recall) and the probe
//! suite, collected into an [`EvalReport`].

mod bleu;
mod recall;
mod suite;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use bleu::{bleu, bleu_n, mask_titles, BleuStats};
pub use recall::{mentions, recall_end_to_end, reference_dialogues, Dialogue, RecallReport};
pub use suite::{run_probe_suite, FamilyScore, ProbeSuiteReport, SuiteOptions};

use crate::probes::ProbeFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub backend_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_end_to_end: Option<RecallReport>,
    pub probes: BTreeMap<ProbeFamily, FamilyScore>,
    pub seed: u64,
    /// Seconds since the epoch, supplied by the caller so identical runs
    /// can produce identical files.
    pub timestamp: u64,
}

impl EvalReport {
    pub fn new(backend_id: impl Into<String>, seed: u64, timestamp: u64) -> Self {
        EvalReport {
            backend_id: backend_id.into(),
            bleu: None,
            recall_end_to_end: None,
            probes: BTreeMap::new(),
            seed,
            timestamp,
        }
    }

    pub fn with_probes(mut self, suite: ProbeSuiteReport) -> Self {
        self.probes = suite.families;
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Fixed-width table: one row per report, one column per probe family,
/// then BLEU and recall.
pub fn summary_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<28}", "backend");
    for f in ProbeFamily::ALL {
        let _ = write!(out, " {:>12}", format!("{} probe", f.short()));
    }
    let _ = writeln!(out, " {:>8} {:>8}", "bleu", "recall");
    for r in reports {
        let mut name = r.backend_id.clone();
        if name.len() > 28 {
            name.truncate(27);
            name.push('~');
        }
        let _ = write!(out, "{name:<28}");
        for f in ProbeFamily::ALL {
            match r.probes.get(&f) {
                Some(s) => {
                    let _ = write!(out, " {:>12.4}", s.score);
                }
                None => {
                    let _ = write!(out, " {:>12}", "-");
                }
            }
        }
        let bleu = r.bleu.map_or("-".to_string(), |b| format!("{b:.2}"));
        let recall = r
            .recall_end_to_end
            .as_ref()
            .map_or("-".to_string(), |x| format!("{:.2}", x.percent));
        let _ = writeln!(out, " {bleu:>8} {recall:>8}");
    }
    out
}
