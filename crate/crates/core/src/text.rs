//! Text conventions shared by the corpus builders, probe generators,
//! scorers and metrics: `@ … @` title delimiters, whitespace tokens,
//! sentence boundaries and phrase matching.

use crate::{Error, Result};

pub fn tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Collapses runs of whitespace to single spaces and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    tokens(text).join(" ")
}

/// Wraps a title in `@` delimiters.
pub fn delimit(title: &str) -> String {
    format!("@ {} @", title.trim())
}

/// One `@ … @` span: byte range covering both delimiters plus the trimmed
/// title between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TitleSpan<'a> {
    pub start: usize,
    pub end: usize,
    pub title: &'a str,
}

/// Pairs up `@` signs left to right. An odd count is an error naming the
/// offset of the unmatched sign.
pub fn title_spans(text: &str) -> Result<Vec<TitleSpan<'_>>> {
    let marks: Vec<usize> = text.match_indices('@').map(|(i, _)| i).collect();
    if marks.len() % 2 == 1 {
        return Err(Error::UnbalancedDelimiter {
            offset: *marks.last().expect("odd count is non-empty"),
        });
    }
    Ok(marks
        .chunks_exact(2)
        .map(|pair| TitleSpan {
            start: pair[0],
            end: pair[1] + 1,
            title: text[pair[0] + 1..pair[1]].trim(),
        })
        .collect())
}

/// Titles in a `@`-joined sequence such as `@ a @ b @ c @`: every non-empty
/// segment between consecutive signs.
pub fn joined_titles(text: &str) -> Vec<&str> {
    let mut parts: Vec<&str> = text.split('@').collect();
    if parts.len() < 3 {
        return Vec::new();
    }
    parts.pop();
    parts
        .into_iter()
        .skip(1)
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Keeps the last `max_tokens` whitespace tokens. If the cut lands inside a
/// delimited title, the partial title is dropped as well.
pub fn truncate_front(text: &str, max_tokens: usize) -> String {
    let toks = tokens(text);
    if toks.len() <= max_tokens {
        return toks.join(" ");
    }
    let cut = toks.len() - max_tokens;
    let dropped_marks: usize = toks[..cut].iter().map(|t| t.matches('@').count()).sum();
    let mut kept = &toks[cut..];
    if dropped_marks % 2 == 1 {
        match kept.iter().position(|t| t.contains('@')) {
            Some(i) => kept = &kept[i + 1..],
            None => kept = &[],
        }
    }
    kept.join(" ")
}

/// Keeps the first `max_tokens` whitespace tokens, dropping a trailing
/// partial title if the cut lands inside one.
pub fn truncate_back(text: &str, max_tokens: usize) -> String {
    let toks = tokens(text);
    if toks.len() <= max_tokens {
        return toks.join(" ");
    }
    let mut kept = &toks[..max_tokens];
    let marks: usize = kept.iter().map(|t| t.matches('@').count()).sum();
    if marks % 2 == 1 {
        let last = kept.iter().rposition(|t| t.contains('@')).unwrap_or(0);
        kept = &kept[..last];
    }
    kept.join(" ")
}

const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "st.", "jr.", "sr.", "vs.", "prof.", "e.g.", "i.e.",
];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits text into sentences.
///
/// A boundary is a run of `.`, `!` or `?` followed by whitespace or the end
/// of the text. A lone `.` does not end a sentence when the word it closes
/// is a common abbreviation (`mr.`, `dr.`, `e.g.`, ...) or a single-letter
/// initial such as `j.`. Sentences are whitespace-normalized; joining them
/// with single spaces reproduces the normalized input.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        if !is_terminal(chars[i].1) {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < chars.len() && is_terminal(chars[i].1) {
            i += 1;
        }
        let at_boundary = i == chars.len() || chars[i].1.is_whitespace();
        if !at_boundary {
            continue;
        }
        let end = if i == chars.len() { text.len() } else { chars[i].0 };
        let single_dot = i - run_start == 1 && chars[run_start].1 == '.';
        if single_dot && closes_abbreviation(&text[start..end]) {
            continue;
        }
        push_sentence(&mut sentences, &text[start..end]);
        start = end;
    }
    push_sentence(&mut sentences, &text[start..]);
    sentences
}

fn closes_abbreviation(segment: &str) -> bool {
    let word = segment
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .to_lowercase();
    let bare = word.trim_start_matches(|c: char| !c.is_alphanumeric());
    if ABBREVIATIONS.contains(&bare) {
        return true;
    }
    let mut cs = bare.chars();
    matches!((cs.next(), cs.next(), cs.next()), (Some(c), Some('.'), None) if c.is_alphabetic())
}

fn push_sentence(out: &mut Vec<String>, raw: &str) {
    let s = normalize_whitespace(raw);
    if !s.is_empty() {
        out.push(s);
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte offsets of every whole-phrase occurrence of `phrase` in `text`.
/// Both strings are expected to be lowercase already.
pub fn phrase_occurrences(text: &str, phrase: &str) -> Vec<usize> {
    if phrase.is_empty() {
        return Vec::new();
    }
    text.match_indices(phrase)
        .filter(|(i, _)| {
            let before = text[..*i].chars().next_back();
            let after = text[i + phrase.len()..].chars().next();
            let head = phrase.chars().next().is_some_and(is_word_char);
            let tail = phrase.chars().next_back().is_some_and(is_word_char);
            !(head && before.is_some_and(is_word_char))
                && !(tail && after.is_some_and(is_word_char))
        })
        .map(|(i, _)| i)
        .collect()
}

/// Matches vocabulary phrases against `text`, preferring the longest phrase
/// at each position and never letting two matches overlap. Returns the
/// distinct phrases in order of first appearance.
pub fn match_phrases<'v, I>(text: &str, vocabulary: I) -> Vec<&'v str>
where
    I: IntoIterator<Item = &'v str>,
{
    let mut hits: Vec<(usize, usize, &'v str)> = Vec::new();
    for phrase in vocabulary {
        for start in phrase_occurrences(text, phrase) {
            hits.push((start, start + phrase.len(), phrase));
        }
    }
    hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2)));
    let mut taken: Vec<(usize, usize, &'v str)> = Vec::new();
    for hit in hits {
        if taken.iter().all(|t| hit.1 <= t.0 || hit.0 >= t.1) {
            taken.push(hit);
        }
    }
    let mut out: Vec<&'v str> = Vec::new();
    for (_, _, phrase) in taken {
        if !out.contains(&phrase) {
            out.push(phrase);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_pair_left_to_right() {
        let spans = title_spans("have you seen @ heat (1995) @ or @ ran (1985) @?").unwrap();
        let titles: Vec<_> = spans.iter().map(|s| s.title).collect();
        assert_eq!(titles, vec!["heat (1995)", "ran (1985)"]);
        assert!(matches!(
            title_spans("a @ b @ c @"),
            Err(Error::UnbalancedDelimiter { offset: 10 })
        ));
    }

    #[test]
    fn joined_sequence_titles() {
        assert_eq!(joined_titles("@ a (1) @ b (2) @"), vec!["a (1)", "b (2)"]);
        assert!(joined_titles("no delimiters").is_empty());
    }

    #[test]
    fn sentence_boundaries() {
        assert_eq!(
            split_sentences("Great film. Loved it!"),
            vec!["Great film.", "Loved it!"]
        );
        assert_eq!(split_sentences("no terminal mark"), vec!["no terminal mark"]);
        assert_eq!(
            split_sentences("Wait... what?! Really."),
            vec!["Wait...", "what?!", "Really."]
        );
        assert_eq!(split_sentences("3.5 stars. ok"), vec!["3.5 stars.", "ok"]);
        assert_eq!(
            split_sentences("Dr. Strangelove by Stanley J. Kubrick. Classic."),
            vec!["Dr. Strangelove by Stanley J. Kubrick.", "Classic."]
        );
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn truncation_keeps_titles_whole() {
        let text = "x @ a b @ y z";
        assert_eq!(truncate_front(text, 5), "y z");
        assert_eq!(truncate_front(text, 6), "@ a b @ y z");
        assert_eq!(truncate_back(text, 3), "x");
        assert_eq!(truncate_back(text, 5), "x @ a b @");
        assert_eq!(truncate_back("a  b", 10), "a b");
    }

    #[test]
    fn longest_phrase_wins() {
        let vocab = ["fiction", "science fiction", "sci", "drama"];
        let found = match_phrases(
            "a science fiction movie, drama too",
            vocab.iter().copied(),
        );
        assert_eq!(found, vec!["science fiction", "drama"]);
        assert!(match_phrases("scientific", vocab.iter().copied()).is_empty());
        assert_eq!(match_phrases("adapted from:book", ["adapted from:book"]), vec!["adapted from:book"]);
    }
}
