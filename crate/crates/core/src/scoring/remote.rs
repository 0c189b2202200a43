//! Client for an external scoring service.
//!
//! ```text
//! POST /v1/score        {"input": s, "target": s}        → {"log_likelihood": x}
//! POST /v1/score_batch  {"pairs": [{"input","target"}]}  → {"log_likelihoods": [x, ...]}
//! ```
//!
//! Text is sent lowercased; the caller includes any task label. Batch
//! results come back in request order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ScoreError, ScoreResult, SequenceScorer};
use crate::Execution;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8500`.
    pub endpoint: String,
    pub timeout_ms: u64,
    /// Upper bound on concurrent HTTP requests.
    pub max_in_flight: usize,
    /// Pairs per `/v1/score_batch` request. 0 sends one `/v1/score` request
    /// per pair instead.
    pub batch_size: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8500".into(),
            timeout_ms: 30_000,
            max_in_flight: 8,
            batch_size: 32,
        }
    }
}

impl RemoteConfig {
    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.timeout_ms == 0 {
            return Err(ScoreError::Config("remote timeout must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(ScoreError::Config("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct PairBody<'a> {
    input: &'a str,
    target: &'a str,
}

#[derive(Serialize)]
struct BatchBody<'a> {
    pairs: Vec<PairBody<'a>>,
}

#[derive(Deserialize)]
struct ScoreReply {
    log_likelihood: f64,
}

#[derive(Deserialize)]
struct BatchReply {
    log_likelihoods: Vec<f64>,
}

pub struct RemoteScorer {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    id: String,
}

impl std::fmt::Debug for RemoteScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteScorer").field("config", &self.config).finish()
    }
}

impl RemoteScorer {
    /// Builds the client. Must not be called from inside an async runtime.
    pub fn new(config: RemoteConfig) -> Result<Self, ScoreError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| ScoreError::Config(e.to_string()))?;
        let id = format!("remote({})", config.endpoint);
        Ok(RemoteScorer { config, client, id })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    fn post<B: Serialize, R: for<'de> Deserialize<'de>>(&self, path: &str, body: &B) -> Result<R, ScoreError> {
        let resp = self.client.post(self.url(path)).json(body).send().map_err(|e| self.classify(e))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| self.classify(e))?;
        if !status.is_success() {
            return Err(ScoreError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        serde_json::from_str(&text).map_err(|e| ScoreError::Malformed(format!("{e}: {text}")))
    }

    fn classify(&self, e: reqwest::Error) -> ScoreError {
        if e.is_timeout() {
            ScoreError::Timeout(Duration::from_millis(self.config.timeout_ms))
        } else {
            ScoreError::Unavailable(e.to_string())
        }
    }

    fn score_chunk(&self, chunk: &[(String, String)]) -> Vec<Result<ScoreResult, ScoreError>> {
        let lowered: Vec<(String, String)> = chunk
            .iter()
            .map(|(i, t)| (i.to_lowercase(), t.to_lowercase()))
            .collect();
        let body = BatchBody {
            pairs: lowered
                .iter()
                .map(|(input, target)| PairBody { input, target })
                .collect(),
        };
        match self.post::<_, BatchReply>("/v1/score_batch", &body) {
            Ok(reply) if reply.log_likelihoods.len() == chunk.len() => reply
                .log_likelihoods
                .into_iter()
                .map(|v| ScoreResult::new(v, self.id.clone()))
                .collect(),
            Ok(reply) => {
                let err = ScoreError::Malformed(format!(
                    "batch of {} pairs answered with {} values",
                    chunk.len(),
                    reply.log_likelihoods.len()
                ));
                vec![Err(err); chunk.len()]
            }
            Err(err) => vec![Err(err); chunk.len()],
        }
    }

    /// Runs `jobs` on at most `max_in_flight` threads; slot `i` of the
    /// result holds job `i`'s output.
    fn bounded<T: Send>(&self, jobs: usize, run: impl Fn(usize) -> T + Sync) -> Vec<T> {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
        let workers = self.config.max_in_flight.min(jobs).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= jobs {
                        break;
                    }
                    let out = run(i);
                    slots.lock().expect("slot lock")[i] = Some(out);
                });
            }
        });
        slots
            .into_inner()
            .expect("slot lock")
            .into_iter()
            .map(|s| s.expect("every job ran"))
            .collect()
    }
}

impl SequenceScorer for RemoteScorer {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn score(&self, input: &str, target: &str) -> Result<ScoreResult, ScoreError> {
        let (input, target) = (input.to_lowercase(), target.to_lowercase());
        let reply: ScoreReply = self.post(
            "/v1/score",
            &PairBody {
                input: &input,
                target: &target,
            },
        )?;
        ScoreResult::new(reply.log_likelihood, self.id.clone())
    }

    fn score_batch(&self, pairs: &[(String, String)], _exec: Execution) -> Vec<Result<ScoreResult, ScoreError>> {
        if pairs.is_empty() {
            return Vec::new();
        }
        if self.config.batch_size == 0 {
            return self.bounded(pairs.len(), |i| self.score(&pairs[i].0, &pairs[i].1));
        }
        let chunks: Vec<&[(String, String)]> = pairs.chunks(self.config.batch_size).collect();
        self.bounded(chunks.len(), |i| self.score_chunk(chunks[i]))
            .into_iter()
            .flatten()
            .collect()
    }
}
