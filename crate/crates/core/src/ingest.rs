//! Parsers for the raw datasets: ReDial dialogues, MovieLens ratings,
//! movies and tag genome, and the review corpus.
//!
//! Every parser is record-tolerant: a malformed record becomes a
//! [`RecordError`] carrying its line number and parsing continues. Only
//! stream-level failures (unreadable input) abort with an [`Error`].

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::text::split_sentences;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

/// Records parsed from one stream, with the records that were rejected or
/// skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub errors: Vec<RecordError>,
    /// Records dropped on purpose (e.g. empty reviews). Not errors.
    pub skipped: Vec<RecordError>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Parsed {
            records: Vec::new(),
            errors: Vec::new(),
            skipped: Vec::new(),
        }
    }
}

impl<T> Parsed<T> {
    fn error(&mut self, line: usize, message: impl Into<String>) {
        self.errors.push(RecordError {
            line,
            message: message.into(),
        });
    }

    /// Fails with the first record error, if any.
    pub fn strict(self) -> Result<Vec<T>> {
        match self.errors.into_iter().next() {
            Some(e) => Err(Error::Record {
                line: e.line,
                message: e.message,
            }),
            None => Ok(self.records),
        }
    }
}

// ---------------------------------------------------------------- ReDial

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Seeker,
    Recommender,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedialConversation {
    pub conversation_id: String,
    pub messages: Vec<Message>,
    /// Mention key (the digits after `@` in message text) to "Title (Year)".
    pub movie_mentions: BTreeMap<String, String>,
}

impl RedialConversation {
    pub fn recommender_turns(&self) -> usize {
        self.messages
            .iter()
            .filter(|m| m.role == Role::Recommender)
            .count()
    }
}

pub(crate) fn mention_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"@(\d+)").expect("valid regex"))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawConversation {
    conversation_id: serde_json::Value,
    messages: Vec<RawMessage>,
    #[serde(default)]
    movie_mentions: MentionTable,
    initiator_worker_id: i64,
    respondent_worker_id: i64,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawMessage {
    sender_worker_id: i64,
    text: String,
}

/// ReDial ships mentions either as an object or, in some dumps, as an empty
/// list when there are none.
#[derive(Deserialize, Default)]
#[serde(untagged)]
enum MentionTable {
    Map(BTreeMap<String, Option<String>>),
    List(#[allow(dead_code)] Vec<serde::de::IgnoredAny>),
    #[default]
    Missing,
}

/// Parses line-delimited ReDial records.
///
/// The initiator is the seeker and the respondent the recommender. A message
/// from any other worker id, or a `@id` mention without a title, rejects the
/// whole record.
pub fn parse_redial(reader: impl BufRead) -> Result<Parsed<RedialConversation>> {
    let mut parsed = Parsed::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match convert_redial(&line) {
            Ok(conv) => parsed.records.push(conv),
            Err(message) => parsed.error(line_no, message),
        }
    }
    Ok(parsed)
}

fn convert_redial(line: &str) -> std::result::Result<RedialConversation, String> {
    let raw: RawConversation = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let conversation_id = match raw.conversation_id {
        serde_json::Value::String(s) => s,
        serde_json::Value::Number(n) => n.to_string(),
        other => return Err(format!("conversationId has unexpected type: {other}")),
    };
    if raw.messages.is_empty() {
        return Err(format!("conversation {conversation_id} has no messages"));
    }
    let movie_mentions: BTreeMap<String, String> = match raw.movie_mentions {
        MentionTable::Map(m) => m
            .into_iter()
            .filter_map(|(k, v)| v.map(|title| (k, title)))
            .collect(),
        MentionTable::List(_) | MentionTable::Missing => BTreeMap::new(),
    };
    let mut messages = Vec::with_capacity(raw.messages.len());
    for msg in raw.messages {
        let role = if msg.sender_worker_id == raw.initiator_worker_id {
            Role::Seeker
        } else if msg.sender_worker_id == raw.respondent_worker_id {
            Role::Recommender
        } else {
            return Err(format!(
                "conversation {conversation_id}: message from unknown worker {}",
                msg.sender_worker_id
            ));
        };
        for cap in mention_pattern().captures_iter(&msg.text) {
            if !movie_mentions.contains_key(&cap[1]) {
                return Err(format!(
                    "conversation {conversation_id}: mention @{} has no title",
                    &cap[1]
                ));
            }
        }
        messages.push(Message {
            role,
            text: msg.text,
        });
    }
    Ok(RedialConversation {
        conversation_id,
        messages,
        movie_mentions,
    })
}

// ------------------------------------------------------------- MovieLens

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingEvent {
    pub user_id: u32,
    pub movie_id: u32,
    pub rating: f32,
    pub timestamp: i64,
}

/// True for multiples of 0.5 in [0.5, 5.0].
pub fn is_half_star(rating: f32) -> bool {
    let doubled = rating * 2.0;
    rating.is_finite() && (0.5..=5.0).contains(&rating) && doubled == doubled.round()
}

fn field<'r>(row: &'r csv::StringRecord, idx: usize, name: &str) -> std::result::Result<&'r str, String> {
    row.get(idx)
        .map(str::trim)
        .ok_or_else(|| format!("missing field {name}"))
}

fn number<T: std::str::FromStr>(row: &csv::StringRecord, idx: usize, name: &str) -> std::result::Result<T, String> {
    let raw = field(row, idx, name)?;
    raw.parse()
        .map_err(|_| format!("{name}: cannot parse {raw:?}"))
}

fn csv_reader(reader: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader)
}

fn line_of(row: &csv::StringRecord, fallback: usize) -> usize {
    row.position().map_or(fallback, |p| p.line() as usize)
}

/// Parses `userId,movieId,rating,timestamp` rows (header required).
pub fn parse_ratings(reader: impl Read) -> Result<Parsed<RatingEvent>> {
    let mut parsed = Parsed::default();
    let mut rdr = csv_reader(reader);
    for (idx, row) in rdr.records().enumerate() {
        let row = match row {
            Ok(row) => row,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                parsed.error(idx + 2, e.to_string());
                continue;
            }
        };
        let line = line_of(&row, idx + 2);
        match rating_row(&row) {
            Ok(event) => parsed.records.push(event),
            Err(message) => parsed.error(line, message),
        }
    }
    Ok(parsed)
}

fn rating_row(row: &csv::StringRecord) -> std::result::Result<RatingEvent, String> {
    let user_id = number(row, 0, "userId")?;
    let movie_id = number(row, 1, "movieId")?;
    let rating: f32 = number(row, 2, "rating")?;
    let timestamp: i64 = number(row, 3, "timestamp")?;
    if !is_half_star(rating) {
        return Err(format!("rating {rating} is not a half-star value in [0.5, 5.0]"));
    }
    if timestamp < 0 {
        return Err(format!("negative timestamp {timestamp}"));
    }
    Ok(RatingEvent {
        user_id,
        movie_id,
        rating,
        timestamp,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovieRecord {
    pub movie_id: u32,
    pub title_with_year: String,
    pub genres: Vec<String>,
}

/// Parses `movieId,title,genres` rows; genres are `|`-separated and the
/// MovieLens placeholder `(no genres listed)` becomes an empty list.
pub fn parse_movies(reader: impl Read) -> Result<Parsed<MovieRecord>> {
    let mut parsed = Parsed::default();
    let mut seen = std::collections::HashSet::new();
    let mut rdr = csv_reader(reader);
    for (idx, row) in rdr.records().enumerate() {
        let row = match row {
            Ok(row) => row,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                parsed.error(idx + 2, e.to_string());
                continue;
            }
        };
        let line = line_of(&row, idx + 2);
        let record = (|| -> std::result::Result<MovieRecord, String> {
            let movie_id = number(&row, 0, "movieId")?;
            let title = field(&row, 1, "title")?.to_string();
            let genres = field(&row, 2, "genres")
                .unwrap_or("")
                .split('|')
                .filter(|g| !g.is_empty() && *g != "(no genres listed)")
                .map(str::to_string)
                .collect();
            Ok(MovieRecord {
                movie_id,
                title_with_year: title,
                genres,
            })
        })();
        match record {
            Ok(m) if !seen.insert(m.movie_id) => {
                parsed.error(line, format!("duplicate movieId {}", m.movie_id))
            }
            Ok(m) => parsed.records.push(m),
            Err(message) => parsed.error(line, message),
        }
    }
    Ok(parsed)
}

/// Movie catalog keyed by id, with a lowercase title lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    movies: BTreeMap<u32, MovieRecord>,
    by_title: HashMap<String, u32>,
}

impl Catalog {
    /// Builds the catalog. When two movies share a lowercased title, the
    /// lower id owns the title lookup.
    pub fn new(movies: impl IntoIterator<Item = MovieRecord>) -> Self {
        let movies: BTreeMap<u32, MovieRecord> =
            movies.into_iter().map(|m| (m.movie_id, m)).collect();
        let mut by_title = HashMap::with_capacity(movies.len());
        for m in movies.values() {
            by_title
                .entry(m.title_with_year.to_lowercase())
                .or_insert(m.movie_id);
        }
        Catalog { movies, by_title }
    }

    pub fn len(&self) -> usize {
        self.movies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.movies.is_empty()
    }

    pub fn get(&self, movie_id: u32) -> Option<&MovieRecord> {
        self.movies.get(&movie_id)
    }

    pub fn title(&self, movie_id: u32) -> Option<&str> {
        self.movies.get(&movie_id).map(|m| m.title_with_year.as_str())
    }

    /// Lowercase display title used in every generated text.
    pub fn lower_title(&self, movie_id: u32) -> Option<String> {
        self.title(movie_id).map(str::to_lowercase)
    }

    /// Exact lookup on the lowercased title-with-year.
    pub fn id_by_title(&self, title: &str) -> Option<u32> {
        self.by_title.get(&title.trim().to_lowercase()).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.movies.keys().copied()
    }

    pub fn movies(&self) -> impl Iterator<Item = &MovieRecord> {
        self.movies.values()
    }

    /// Lowercased titles with their ids, for free-text matching.
    pub fn lower_titles(&self) -> impl Iterator<Item = (&str, u32)> {
        self.by_title.iter().map(|(t, id)| (t.as_str(), *id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagRelevance {
    pub movie_id: u32,
    pub tag_name: String,
    pub relevance: f32,
}

/// Joins `movieId,tagId,relevance` score rows with `tagId,tag` name rows.
pub fn parse_tag_genome(scores: impl Read, names: impl Read) -> Result<Parsed<TagRelevance>> {
    let mut parsed = Parsed::default();
    let mut tag_names: HashMap<u32, String> = HashMap::new();
    let mut rdr = csv_reader(names);
    for (idx, row) in rdr.records().enumerate() {
        let row = row?;
        let line = line_of(&row, idx + 2);
        let entry = number::<u32>(&row, 0, "tagId")
            .and_then(|id| field(&row, 1, "tag").map(|name| (id, name.to_string())));
        match entry {
            Ok((id, name)) => {
                tag_names.insert(id, name);
            }
            Err(message) => parsed.error(line, format!("genome-tags: {message}")),
        }
    }

    let mut rdr = csv_reader(scores);
    for (idx, row) in rdr.records().enumerate() {
        let row = match row {
            Ok(row) => row,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                parsed.error(idx + 2, e.to_string());
                continue;
            }
        };
        let line = line_of(&row, idx + 2);
        let record = (|| -> std::result::Result<TagRelevance, String> {
            let movie_id = number(&row, 0, "movieId")?;
            let tag_id: u32 = number(&row, 1, "tagId")?;
            let relevance: f32 = number(&row, 2, "relevance")?;
            if !(0.0..=1.0).contains(&relevance) {
                return Err(format!("relevance {relevance} outside [0, 1]"));
            }
            let tag_name = tag_names
                .get(&tag_id)
                .ok_or_else(|| format!("join error: tagId {tag_id} has no name"))?
                .clone();
            Ok(TagRelevance {
                movie_id,
                tag_name,
                relevance,
            })
        })();
        match record {
            Ok(r) => parsed.records.push(r),
            Err(message) => parsed.error(line, message),
        }
    }
    Ok(parsed)
}

// --------------------------------------------------------------- reviews

/// How a review names its movie.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MovieRef {
    Id { movie_id: u32 },
    Title { title: String },
}

impl MovieRef {
    pub fn resolve(&self, catalog: &Catalog) -> Option<u32> {
        match self {
            MovieRef::Id { movie_id } => catalog.get(*movie_id).map(|m| m.movie_id),
            MovieRef::Title { title } => catalog.id_by_title(title),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    #[serde(flatten)]
    pub movie: MovieRef,
    pub text: String,
    #[serde(default)]
    pub sentences: Vec<String>,
}

impl Review {
    pub fn new(movie: MovieRef, text: impl Into<String>) -> Self {
        let text = text.into();
        let sentences = split_sentences(&text);
        Review {
            movie,
            text,
            sentences,
        }
    }
}

/// Parses line-delimited `{"movie_id" | "title", "text"}` records and splits
/// each review into sentences. Reviews with empty text are skipped.
pub fn parse_reviews(reader: impl BufRead) -> Result<Parsed<Review>> {
    #[derive(Deserialize)]
    struct RawReview {
        #[serde(flatten)]
        movie: MovieRef,
        text: String,
    }

    let mut parsed = Parsed::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawReview>(&line) {
            Ok(raw) if raw.text.trim().is_empty() => {
                tracing::warn!(line = line_no, "skipping review with empty text");
                parsed.skipped.push(RecordError {
                    line: line_no,
                    message: "empty review text".into(),
                });
            }
            Ok(raw) => parsed.records.push(Review::new(raw.movie, raw.text)),
            Err(e) => parsed.error(line_no, e.to_string()),
        }
    }
    Ok(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix_record() -> String {
        serde_json::json!({
            "conversationId": "20001",
            "initiatorWorkerId": 1,
            "respondentWorkerId": 2,
            "movieMentions": {"111776": "50 First Dates (2004)"},
            "messages": [
                {"senderWorkerId": 1, "text": "I'm in the mood to watch a romantic comedy. What do you suggest?"},
                {"senderWorkerId": 2, "text": "@111776 Have you seen that one?"}
            ],
            "initiatorQuestions": {},
            "respondentQuestions": {}
        })
        .to_string()
    }

    #[test]
    fn redial_roles_follow_worker_ids() {
        let parsed = parse_redial(appendix_record().as_bytes()).unwrap();
        assert!(parsed.errors.is_empty());
        let conv = &parsed.records[0];
        assert_eq!(conv.messages.len(), 2);
        assert_eq!(conv.messages[0].role, Role::Seeker);
        assert_eq!(conv.messages[1].role, Role::Recommender);
        assert_eq!(conv.movie_mentions["111776"], "50 First Dates (2004)");
    }

    #[test]
    fn redial_empty_and_bad_records() {
        assert!(parse_redial("".as_bytes()).unwrap().records.is_empty());

        let third = appendix_record().replace("\"senderWorkerId\":2", "\"senderWorkerId\":3");
        let input = format!("{}\nnot json\n{}\n", appendix_record(), third);
        let parsed = parse_redial(input.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        let lines: Vec<_> = parsed.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3]);
        assert!(parsed.errors[1].message.contains("unknown worker 3"));
    }

    #[test]
    fn redial_dangling_mention_is_rejected() {
        let bad = appendix_record().replace("@111776", "@999");
        let parsed = parse_redial(bad.as_bytes()).unwrap();
        assert!(parsed.records.is_empty());
        assert!(parsed.errors[0].message.contains("@999"));
    }

    #[test]
    fn ratings_rows() {
        let parsed =
            parse_ratings("userId,movieId,rating,timestamp\n1,296,5.0,1147880044\n1,2,6.0,1\n1,3,4.25,1\n1,4,4.5,-2\n".as_bytes())
                .unwrap();
        assert_eq!(
            parsed.records,
            vec![RatingEvent {
                user_id: 1,
                movie_id: 296,
                rating: 5.0,
                timestamp: 1147880044
            }]
        );
        let lines: Vec<_> = parsed.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![3, 4, 5]);
    }

    #[test]
    fn movies_and_catalog() {
        let csv = "movieId,title,genres\n1,Toy Story (1995),Adventure|Animation\n2,\"American President, The (1995)\",(no genres listed)\n1,Dup (2000),Drama\n";
        let parsed = parse_movies(csv.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.errors.len(), 1);
        assert!(parsed.records[1].genres.is_empty());
        let catalog = Catalog::new(parsed.records);
        assert_eq!(catalog.id_by_title("american president, the (1995)"), Some(2));
        assert_eq!(catalog.lower_title(1).as_deref(), Some("toy story (1995)"));
    }

    #[test]
    fn tag_genome_join() {
        let scores = "movieId,tagId,relevance\n1,7,0.95\n1,8,0.5\n2,7,1.5\n";
        let names = "tagId,tag\n7,based on a book\n";
        let parsed = parse_tag_genome(scores.as_bytes(), names.as_bytes()).unwrap();
        assert_eq!(
            parsed.records,
            vec![TagRelevance {
                movie_id: 1,
                tag_name: "based on a book".into(),
                relevance: 0.95
            }]
        );
        assert!(parsed.errors[0].message.contains("join error"));
        assert!(parsed.errors[1].message.contains("outside"));
    }

    #[test]
    fn reviews_split_and_skip() {
        let input = "{\"movie_id\": 3, \"text\": \"Great film. Loved it!\"}\n{\"title\": \"Heat (1995)\", \"text\": \"  \"}\n{\"title\": \"Heat (1995)\", \"text\": \"no punctuation here\"}\n";
        let parsed = parse_reviews(input.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.skipped.len(), 1);
        assert_eq!(parsed.records[0].sentences, vec!["Great film.", "Loved it!"]);
        assert_eq!(parsed.records[0].movie, MovieRef::Id { movie_id: 3 });
        assert_eq!(parsed.records[1].sentences, vec!["no punctuation here"]);
    }
}
