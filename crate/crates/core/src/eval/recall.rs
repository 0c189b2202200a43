use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::render_mentions;
use crate::ingest::{RedialConversation, Role};
use crate::text::normalize_whitespace;
use crate::{Error, Result};

/// Recommender turns of one conversation, titles in `@ … @` form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub conversation_id: String,
    pub turns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub percent: f64,
    pub matched: u64,
    pub generated: u64,
    pub zero_denominator: bool,
}

/// Lowercased titles between `@` pairs, read left to right. A trailing
/// unmatched `@` and the text after it are ignored.
pub fn mentions(text: &str) -> Vec<String> {
    let parts: Vec<&str> = text.split('@').collect();
    let closed = parts.len() - (1 - parts.len() % 2);
    parts[..closed]
        .iter()
        .skip(1)
        .step_by(2)
        .map(|t| normalize_whitespace(t).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// The human recommender's side of each ReDial conversation.
pub fn reference_dialogues(conversations: &[RedialConversation]) -> Vec<Dialogue> {
    conversations
        .iter()
        .map(|c| Dialogue {
            conversation_id: c.conversation_id.clone(),
            turns: c
                .messages
                .iter()
                .filter(|m| m.role == Role::Recommender)
                .map(|m| render_mentions(&m.text, &c.movie_mentions))
                .collect(),
        })
        .collect()
}

/// Share of generated mentions that name a movie the human recommender
/// mentioned somewhere in the same conversation, pooled over the corpus.
pub fn recall_end_to_end(generated: &[Dialogue], reference: &[Dialogue]) -> Result<RecallReport> {
    let known: HashMap<&str, BTreeSet<String>> = reference
        .iter()
        .map(|d| {
            let titles = d.turns.iter().flat_map(|t| mentions(t)).collect();
            (d.conversation_id.as_str(), titles)
        })
        .collect();
    let (mut matched, mut total) = (0u64, 0u64);
    for d in generated {
        let Some(human) = known.get(d.conversation_id.as_str()) else {
            return Err(Error::Invalid(format!(
                "generated conversation {:?} has no reference",
                d.conversation_id
            )));
        };
        for m in d.turns.iter().flat_map(|t| mentions(t)) {
            total += 1;
            if human.contains(&m) {
                matched += 1;
            }
        }
    }
    Ok(RecallReport {
        percent: if total == 0 { 0.0 } else { 100.0 * matched as f64 / total as f64 },
        matched,
        generated: total,
        zero_denominator: total == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(id: &str, turns: &[&str]) -> Dialogue {
        Dialogue {
            conversation_id: id.into(),
            turns: turns.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn mention_extraction() {
        assert_eq!(mentions("try @ Heat (1995) @ or @ up (2009) @!"), ["heat (1995)", "up (2009)"]);
        assert_eq!(mentions("dangling @ title"), Vec::<String>::new());
        assert!(mentions("none").is_empty());
    }

    #[test]
    fn exact_match_is_full_recall() {
        let r = [d("1", &["@ a (2000) @ and @ b (2001) @"])];
        let rep = recall_end_to_end(&r, &r).unwrap();
        assert_eq!(rep.percent, 100.0);
    }

    #[test]
    fn zero_mentions_flagged() {
        let rep = recall_end_to_end(&[d("1", &["hi"])], &[d("1", &["@ a @"])]).unwrap();
        assert_eq!(rep.percent, 0.0);
        assert!(rep.zero_denominator);
    }

    #[test]
    fn unknown_conversation_is_an_error() {
        assert!(recall_end_to_end(&[d("9", &["@ a @"])], &[d("1", &[])]).is_err());
    }
}
