//! The four text-to-text training corpora and their export.
//!
//! | task                 | input                                   | target              |
//! |----------------------|-----------------------------------------|---------------------|
//! | redial conversation  | `[user] … [assistant] …` dialogue prefix | next recommender turn |
//! | movielens sequence   | `@ t1 @ t2 @ … @` liked-movie prefix    | next liked title    |
//! | movielens tags       | 1–5 comma-joined tags                   | movie title         |
//! | movielens review     | `review for @ title @: ` + first t sentences | sentence t+1   |
//!
//! All text is lowercased. Inputs are capped at [`MAX_INPUT_TOKENS`]
//! whitespace tokens including the task label, targets at
//! [`MAX_TARGET_TOKENS`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{mention_pattern, Catalog, RatingEvent, RedialConversation, Review, Role};
use crate::stats::TagIndex;
use crate::text::{delimit, normalize_whitespace, token_count, truncate_back, truncate_front};
use crate::{jsonl, par, Error, Execution, Result};

pub const MAX_INPUT_TOKENS: usize = 512;
pub const MAX_TARGET_TOKENS: usize = 128;
pub const WINDOW_LEN: usize = 10;
pub const LIKED_ABOVE: f32 = 4.0;
pub const TAG_EXAMPLES_PER_MOVIE: usize = 3;
pub const MAX_TAGS_PER_EXAMPLE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskLabel {
    RedialConversation,
    MovielensSequence,
    MovielensTags,
    MovielensReview,
}

impl TaskLabel {
    pub const ALL: [TaskLabel; 4] = [
        TaskLabel::RedialConversation,
        TaskLabel::MovielensSequence,
        TaskLabel::MovielensTags,
        TaskLabel::MovielensReview,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TaskLabel::RedialConversation => "redial conversation:",
            TaskLabel::MovielensSequence => "movielens sequence:",
            TaskLabel::MovielensTags => "movielens tags:",
            TaskLabel::MovielensReview => "movielens review:",
        }
    }

    /// Short name used for file names and the CLI.
    pub fn slug(self) -> &'static str {
        match self {
            TaskLabel::RedialConversation => "redial",
            TaskLabel::MovielensSequence => "sequences",
            TaskLabel::MovielensTags => "tags",
            TaskLabel::MovielensReview => "reviews",
        }
    }

    fn input_budget(self) -> usize {
        MAX_INPUT_TOKENS - token_count(self.label())
    }

    pub fn from_label(label: &str) -> Option<TaskLabel> {
        TaskLabel::ALL.into_iter().find(|t| t.label() == label)
    }
}

impl fmt::Display for TaskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for TaskLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskLabel::ALL
            .into_iter()
            .find(|t| t.slug() == s || t.label() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown task {s:?}")))
    }
}

impl Serialize for TaskLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for TaskLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TaskLabel::from_label(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown task label {s:?}")))
    }
}

/// One training example. `input` does not carry the task label; see
/// [`TrainingExample::model_input`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub task: TaskLabel,
    pub input: String,
    pub target: String,
}

impl TrainingExample {
    /// The input as the model sees it, with the task label prepended once.
    pub fn model_input(&self) -> String {
        if self.input.is_empty() {
            self.task.label().to_string()
        } else {
            format!("{} {}", self.task.label(), self.input)
        }
    }
}

fn sanitize(text: &str) -> String {
    text.replace('@', " at ")
}

/// Replaces `@123` mention keys with `@ title @` and neutralizes any other
/// `@` so delimiters stay balanced. Lowercases and normalizes whitespace.
pub fn render_mentions(text: &str, mentions: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(text.len() + 32);
    let mut last = 0;
    for cap in mention_pattern().captures_iter(text) {
        let whole = cap.get(0).expect("group 0");
        out.push_str(&sanitize(&text[last..whole.start()]));
        match mentions.get(&cap[1]) {
            Some(title) => {
                out.push(' ');
                out.push_str(&delimit(&sanitize(title)));
                out.push(' ');
            }
            None => out.push_str(&cap[1]),
        }
        last = whole.end();
    }
    out.push_str(&sanitize(&text[last..]));
    normalize_whitespace(&out).to_lowercase()
}

fn role_tag(role: Role) -> &'static str {
    match role {
        Role::Seeker => "[user]",
        Role::Recommender => "[assistant]",
    }
}

/// One example per recommender message: the dialogue so far as input, that
/// message as target. Over-long contexts lose their oldest turns first.
pub fn build_redial_examples(conversation: &RedialConversation) -> Vec<TrainingExample> {
    let task = TaskLabel::RedialConversation;
    let budget = task.input_budget();
    let rendered: Vec<(Role, String)> = conversation
        .messages
        .iter()
        .map(|m| (m.role, render_mentions(&m.text, &conversation.movie_mentions)))
        .collect();
    let turns: Vec<String> = rendered
        .iter()
        .map(|(role, text)| normalize_whitespace(&format!("{} {}", role_tag(*role), text)))
        .collect();

    let mut examples = Vec::new();
    for (i, (role, text)) in rendered.iter().enumerate() {
        if *role != Role::Recommender {
            continue;
        }
        let mut first = 0;
        let mut used: usize = turns[..i].iter().map(|t| token_count(t)).sum();
        while used > budget && first + 1 < i {
            used -= token_count(&turns[first]);
            first += 1;
        }
        let context = turns[first..i].join(" ");
        examples.push(TrainingExample {
            task,
            input: truncate_front(&context, budget),
            target: truncate_back(text, MAX_TARGET_TOKENS),
        });
    }
    examples
}

/// A timestamp-ordered run of [`WINDOW_LEN`] movies one user rated above
/// [`LIKED_ABOVE`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikedWindow {
    pub user_id: u32,
    pub movies: Vec<u32>,
}

/// Cuts each user's liked movies (rating strictly above 4.0, ordered by
/// timestamp then movie id) into consecutive non-overlapping windows of ten.
/// A leftover run shorter than ten is discarded. With a catalog, movies
/// missing from it are dropped before windowing. Repeat ratings of the same
/// movie keep only the earliest.
pub fn liked_windows(
    ratings: &[RatingEvent],
    catalog: Option<&Catalog>,
    exec: Execution,
) -> Vec<LikedWindow> {
    let mut by_user: BTreeMap<u32, Vec<(i64, u32)>> = BTreeMap::new();
    for r in ratings {
        if r.rating > LIKED_ABOVE && catalog.is_none_or(|c| c.get(r.movie_id).is_some()) {
            by_user
                .entry(r.user_id)
                .or_default()
                .push((r.timestamp, r.movie_id));
        }
    }
    let users: Vec<(u32, Vec<(i64, u32)>)> = by_user.into_iter().collect();
    par::flat_map(exec, &users, |(user_id, liked)| {
        let mut liked = liked.clone();
        liked.sort_unstable();
        let mut seen = HashSet::new();
        let movies: Vec<u32> = liked
            .into_iter()
            .map(|(_, m)| m)
            .filter(|m| seen.insert(*m))
            .collect();
        movies
            .chunks_exact(WINDOW_LEN)
            .map(|chunk| LikedWindow {
                user_id: *user_id,
                movies: chunk.to_vec(),
            })
            .collect()
    })
}

fn join_titles(titles: &[String]) -> String {
    if titles.is_empty() {
        return String::new();
    }
    format!("@ {} @", titles.join(" @ "))
}

/// For each window and each prefix length n in 1..=9: the first n titles
/// `@`-joined as input, title n+1 as target.
pub fn build_sequence_examples(
    windows: &[LikedWindow],
    catalog: &Catalog,
    exec: Execution,
) -> Vec<TrainingExample> {
    let task = TaskLabel::MovielensSequence;
    let budget = task.input_budget();
    par::flat_map(exec, windows, |window| {
        let titles: Option<Vec<String>> = window
            .movies
            .iter()
            .map(|m| catalog.lower_title(*m).map(|t| sanitize(&t).trim().to_string()))
            .collect();
        let Some(titles) = titles else {
            return Vec::new();
        };
        (1..titles.len())
            .map(|n| {
                let mut first = 0;
                let mut input = join_titles(&titles[..n]);
                while token_count(&input) > budget && first + 1 < n {
                    first += 1;
                    input = join_titles(&titles[first..n]);
                }
                TrainingExample {
                    task,
                    input: truncate_front(&input, budget),
                    target: truncate_back(&titles[n], MAX_TARGET_TOKENS),
                }
            })
            .collect()
    })
}

/// `per_movie` examples for every movie with a non-empty tag list, each
/// drawing 1–5 distinct tags. Each movie owns an RNG stream derived from
/// `seed` and its id, so output is independent of execution order.
pub fn build_tag_examples(
    tags: &TagIndex,
    catalog: &Catalog,
    seed: u64,
    per_movie: usize,
    exec: Execution,
) -> Vec<TrainingExample> {
    let task = TaskLabel::MovielensTags;
    let movies: Vec<(u32, Vec<&str>)> = tags
        .movies()
        .filter_map(|(m, set)| {
            let list: Vec<&str> = set.iter().map(String::as_str).collect();
            (!list.is_empty()).then_some((m, list))
        })
        .collect();
    par::flat_map(exec, &movies, |(movie_id, list)| {
        let Some(title) = catalog.lower_title(*movie_id) else {
            return Vec::new();
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(*movie_id));
        (0..per_movie)
            .map(|_| {
                let k = rng.random_range(1..=MAX_TAGS_PER_EXAMPLE).min(list.len());
                let picked: Vec<&str> = rand::seq::index::sample(&mut rng, list.len(), k)
                    .into_iter()
                    .map(|i| list[i])
                    .collect();
                TrainingExample {
                    task,
                    input: truncate_front(&picked.join(", ").to_lowercase(), task.input_budget()),
                    target: truncate_back(&sanitize(&title), MAX_TARGET_TOKENS),
                }
            })
            .collect()
    })
}

/// Title used in a review prompt: catalog title when resolvable, otherwise
/// the title given by the record itself.
pub fn review_title(review: &Review, catalog: &Catalog) -> Option<String> {
    match review.movie.resolve(catalog) {
        Some(id) => catalog.lower_title(id),
        None => match &review.movie {
            crate::ingest::MovieRef::Title { title } => Some(title.to_lowercase()),
            crate::ingest::MovieRef::Id { .. } => None,
        },
    }
}

/// For a review of s sentences, s examples: the prompt plus the first t
/// sentences as input, sentence t+1 as target, for t in 0..s. Only the
/// prompt title is delimited; `@` inside review bodies is neutralized.
pub fn build_review_examples(
    reviews: &[Review],
    catalog: &Catalog,
    exec: Execution,
) -> Vec<TrainingExample> {
    let task = TaskLabel::MovielensReview;
    par::flat_map(exec, reviews, |review| {
        let Some(title) = review_title(review, catalog) else {
            return Vec::new();
        };
        let prompt = format!("review for {}:", delimit(&sanitize(&title)));
        let body_budget = task.input_budget().saturating_sub(token_count(&prompt));
        let sentences: Vec<String> = review
            .sentences
            .iter()
            .map(|s| normalize_whitespace(&sanitize(s)).to_lowercase())
            .collect();
        (0..sentences.len())
            .map(|t| {
                let body = truncate_front(&sentences[..t].join(" "), body_budget);
                let input = if body.is_empty() {
                    prompt.clone()
                } else {
                    format!("{prompt} {body}")
                };
                TrainingExample {
                    task,
                    input,
                    target: truncate_back(&sentences[t], MAX_TARGET_TOKENS),
                }
            })
            .collect()
    })
}

// ----------------------------------------------------------------- export

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub model_size: String,
    pub learning_rate: f64,
    pub steps: u64,
    pub batch_size: u64,
    pub max_input_tokens: usize,
    pub max_target_tokens: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            model_size: "base, 220M".into(),
            learning_rate: 0.003,
            steps: 40_000,
            batch_size: 128,
            max_input_tokens: MAX_INPUT_TOKENS,
            max_target_tokens: MAX_TARGET_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    /// Example count per task label.
    pub counts: BTreeMap<String, usize>,
    /// Per-task file names, relative to the export directory.
    pub files: BTreeMap<String, String>,
    pub mixed_file: String,
    pub mixed_count: usize,
    pub mixing: String,
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
}

#[derive(Serialize, Deserialize)]
struct ExportRecord {
    task: TaskLabel,
    input: String,
    target: String,
}

impl From<&TrainingExample> for ExportRecord {
    fn from(ex: &TrainingExample) -> Self {
        ExportRecord {
            task: ex.task,
            input: ex.model_input(),
            target: ex.target.clone(),
        }
    }
}

pub const MIXED_FILE: &str = "mixed.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn task_file(task: TaskLabel) -> String {
    format!("{}.jsonl", task.slug())
}

/// Round-robin interleaving over the non-empty tasks in label order, each
/// task's examples shuffled under `seed`. When a task runs out the others
/// keep cycling.
pub fn interleave(corpora: &BTreeMap<TaskLabel, Vec<TrainingExample>>, seed: u64) -> Vec<TrainingExample> {
    let mut queues: Vec<std::vec::IntoIter<TrainingExample>> = corpora
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(task, v)| {
            let mut v = v.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(*task as u64);
            v.shuffle(&mut rng);
            v.into_iter()
        })
        .collect();
    let mut out = Vec::with_capacity(corpora.values().map(Vec::len).sum());
    loop {
        let mut any = false;
        for q in queues.iter_mut() {
            if let Some(ex) = q.next() {
                out.push(ex);
                any = true;
            }
        }
        if !any {
            break;
        }
    }
    out
}

/// Writes one file per task, the interleaved file and the manifest, then
/// re-counts every file against the manifest.
pub fn mix_and_export(
    corpora: &BTreeMap<TaskLabel, Vec<TrainingExample>>,
    hyperparameters: &Hyperparameters,
    seed: u64,
    out_dir: &Path,
) -> Result<CorpusManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut counts = BTreeMap::new();
    let mut files = BTreeMap::new();
    for (task, examples) in corpora {
        let name = task_file(*task);
        let records: Vec<ExportRecord> = examples.iter().map(ExportRecord::from).collect();
        jsonl::write(&out_dir.join(&name), &records)?;
        counts.insert(task.label().to_string(), examples.len());
        files.insert(task.label().to_string(), name);
    }
    let mixed = interleave(corpora, seed);
    let records: Vec<ExportRecord> = mixed.iter().map(ExportRecord::from).collect();
    jsonl::write(&out_dir.join(MIXED_FILE), &records)?;

    let manifest = CorpusManifest {
        counts,
        files,
        mixed_file: MIXED_FILE.into(),
        mixed_count: mixed.len(),
        mixing: "equal".into(),
        seed,
        hyperparameters: hyperparameters.clone(),
    };
    verify_manifest(&manifest, out_dir)?;
    jsonl::write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Checks that every file named by the manifest has the recorded number of
/// lines.
pub fn verify_manifest(manifest: &CorpusManifest, dir: &Path) -> Result<()> {
    let mut expected: Vec<(PathBuf, usize)> = manifest
        .files
        .iter()
        .map(|(label, file)| (dir.join(file), manifest.counts.get(label).copied().unwrap_or(0)))
        .collect();
    expected.push((dir.join(&manifest.mixed_file), manifest.mixed_count));
    for (path, want) in expected {
        let got = jsonl::count_lines(&path)?;
        if got != want {
            return Err(Error::Export(format!(
                "{} has {got} lines, manifest says {want}",
                path.display()
            )));
        }
    }
    Ok(())
}

/// Reads an exported corpus file back, stripping the task label from each
/// input.
pub fn load_examples(path: &Path) -> Result<Vec<TrainingExample>> {
    let records: Vec<ExportRecord> = jsonl::read(path)?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let label = r.task.label();
            let input = if r.input == label {
                String::new()
            } else {
                r.input
                    .strip_prefix(label)
                    .and_then(|rest| rest.strip_prefix(' '))
                    .ok_or_else(|| Error::Record {
                        line: i + 1,
                        message: format!("input does not start with task label {label:?}"),
                    })?
                    .to_string()
            };
            Ok(TrainingExample {
                task: r.task,
                input,
                target: r.target,
            })
        })
        .collect()
}
