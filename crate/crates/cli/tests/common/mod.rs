#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::routing::post;
use axum::{Json, Router};
use crs_core::corpus::LikedWindow;
use crs_core::stats::{StatsConfig, StatsStore, StoreInputs};
use crs_core::synth::{SynthConfig, SynthData};
use crs_core::Execution;
use serde_json::{json, Value};

pub fn synth_data() -> SynthData {
    SynthData::generate(&SynthConfig::default())
}

pub fn store_from(data: &SynthData, exec: Execution) -> StatsStore {
    StatsStore::build(
        StoreInputs {
            movies: data.movies.clone(),
            ratings: data.ratings.clone(),
            tag_relevance: data.tag_relevance(),
            reviews: data.reviews.clone(),
        },
        StatsConfig::default(),
        exec,
    )
}

/// Pair, marginal and total counts recounted from the windows by brute force.
pub struct PairOracle {
    pub pairs: HashMap<(u32, u32), u64>,
    pub marginal: HashMap<u32, u64>,
    pub total: u64,
}

impl PairOracle {
    pub fn new(windows: &[LikedWindow]) -> Self {
        let mut pairs = HashMap::new();
        let mut marginal = HashMap::new();
        let mut total = 0;
        for w in windows {
            for i in 0..w.movies.len() {
                for j in 0..w.movies.len() {
                    if i < j {
                        let (a, b) = (w.movies[i].min(w.movies[j]), w.movies[i].max(w.movies[j]));
                        *pairs.entry((a, b)).or_insert(0) += 1;
                        *marginal.entry(a).or_insert(0) += 1;
                        *marginal.entry(b).or_insert(0) += 1;
                        total += 1;
                    }
                }
            }
        }
        PairOracle { pairs, marginal, total }
    }

    pub fn count(&self, a: u32, b: u32) -> u64 {
        self.pairs.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    }

    /// ln(p(a,b)² / (p(a)·p(b))) with p(a,b) = c/T and p(a) = c_a/(2T).
    pub fn pmi2(&self, a: u32, b: u32) -> Option<f64> {
        let c = self.count(a, b);
        if c == 0 {
            return None;
        }
        let t = self.total as f64;
        let pab = c as f64 / t;
        let pa = self.marginal[&a] as f64 / (2.0 * t);
        let pb = self.marginal[&b] as f64 / (2.0 * t);
        Some((pab * pab / (pa * pb)).ln())
    }
}

/// Occurrence counts per movie over the windows.
pub fn occurrences(windows: &[LikedWindow]) -> BTreeMap<u32, u64> {
    let mut counts = BTreeMap::new();
    for w in windows {
        for m in &w.movies {
            *counts.entry(*m).or_insert(0) += 1;
        }
    }
    counts
}

/// Movies seen more than `above` times, and the top tenth of them by count
/// (ties to the smaller id), rounded up.
pub fn eligible_and_top_decile(windows: &[LikedWindow], above: u64) -> (BTreeSet<u32>, BTreeSet<u32>) {
    let counts = occurrences(windows);
    let mut eligible: Vec<(u32, u64)> = counts.into_iter().filter(|(_, c)| *c > above).collect();
    eligible.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    let top = (eligible.len() as f64 / 10.0).ceil() as usize;
    (
        eligible.iter().map(|e| e.0).collect(),
        eligible.iter().take(top).map(|e| e.0).collect(),
    )
}

/// Movie → tags with relevance strictly above `threshold`, from raw genome rows.
pub fn tag_oracle(data: &SynthData, threshold: f32) -> HashMap<u32, BTreeSet<String>> {
    let names: HashMap<u32, &str> = data.tag_names.iter().map(|(id, n)| (*id, n.as_str())).collect();
    let mut out: HashMap<u32, BTreeSet<String>> = HashMap::new();
    for (m, t, r) in &data.tag_scores {
        if *r > threshold {
            out.entry(*m).or_default().insert(names[t].to_lowercase());
        }
    }
    out
}

/// Clipped n-gram BLEU written from the definition with nested loops.
pub fn bleu_oracle(cands: &[&str], refs: &[&str], max_n: usize) -> f64 {
    let mut matches = vec![0f64; max_n];
    let mut totals = vec![0f64; max_n];
    let (mut c_len, mut r_len) = (0f64, 0f64);
    for (c, r) in cands.iter().zip(refs) {
        let c: Vec<&str> = c.split_whitespace().collect();
        let r: Vec<&str> = r.split_whitespace().collect();
        c_len += c.len() as f64;
        r_len += r.len() as f64;
        for n in 1..=max_n {
            if c.len() < n {
                continue;
            }
            let cg: Vec<&[&str]> = c.windows(n).collect();
            let rg: Vec<&[&str]> = r.windows(n).collect();
            totals[n - 1] += cg.len() as f64;
            let mut seen: Vec<&[&str]> = Vec::new();
            for g in &cg {
                if seen.contains(g) {
                    continue;
                }
                seen.push(g);
                let in_c = cg.iter().filter(|x| *x == g).count();
                let in_r = rg.iter().filter(|x| *x == g).count();
                matches[n - 1] += in_c.min(in_r) as f64;
            }
        }
    }
    if matches.contains(&0.0) {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..max_n {
        log_sum += (matches[n] / totals[n]).ln();
    }
    let bp = if c_len > r_len { 1.0 } else { (1.0 - r_len / c_len).exp() };
    100.0 * bp * (log_sum / max_n as f64).exp()
}

/// Deterministic stub log-likelihood for a pair.
pub fn stub_value(input: &str, target: &str) -> f64 {
    -((input.len() * 31 + target.len()) as f64) / 7.0 - 0.1
}

/// Pairs received by the stub, one list per request.
pub type RequestLog = Arc<Mutex<Vec<Vec<(String, String)>>>>;

/// A scoring service stub on an ephemeral port. Records every pair it
/// receives, in arrival order per request.
pub struct Stub {
    pub addr: SocketAddr,
    pub log: RequestLog,
    _runtime: tokio::runtime::Runtime,
}

impl Stub {
    pub fn start() -> Stub {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        let log: RequestLog = Arc::default();
        let l1 = log.clone();
        let l2 = log.clone();
        let app = Router::new()
            .route(
                "/v1/score",
                post(move |Json(body): Json<Value>| {
                    let log = l1.clone();
                    async move {
                        let (i, t) = (body["input"].as_str().unwrap().to_string(), body["target"].as_str().unwrap().to_string());
                        let v = if t == "fixed" { -3.25 } else { stub_value(&i, &t) };
                        log.lock().unwrap().push(vec![(i, t)]);
                        Json(json!({ "log_likelihood": v }))
                    }
                }),
            )
            .route(
                "/v1/score_batch",
                post(move |Json(body): Json<Value>| {
                    let log = l2.clone();
                    async move {
                        let pairs: Vec<(String, String)> = body["pairs"]
                            .as_array()
                            .unwrap()
                            .iter()
                            .map(|p| (p["input"].as_str().unwrap().to_string(), p["target"].as_str().unwrap().to_string()))
                            .collect();
                        let values: Vec<f64> = pairs.iter().map(|(i, t)| stub_value(i, t)).collect();
                        log.lock().unwrap().push(pairs);
                        Json(json!({ "log_likelihoods": values }))
                    }
                }),
            );
        let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let addr = listener.local_addr().unwrap();
        runtime.spawn(async move { axum::serve(listener, app).await.unwrap() });
        Stub {
            addr,
            log,
            _runtime: runtime,
        }
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

/// The crs HTTP service over `store`, on an ephemeral port.
pub struct Service {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    runtime: Option<tokio::runtime::Runtime>,
}

impl Service {
    pub fn start(store: StatsStore) -> Service {
        use crs_cli::server::{serve, AppState};
        use crs_core::scoring::{CompositeScorer, CompositeWeights};

        let store = Arc::new(store);
        let scorer = Arc::new(CompositeScorer::new(store.clone(), CompositeWeights::default()).unwrap());
        let state = Arc::new(AppState {
            store,
            chat: Default::default(),
            scorer,
        });
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()
            .unwrap();
        let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        runtime.spawn(async move {
            serve(listener, state, async {
                let _ = rx.await;
            })
            .await
            .unwrap()
        });
        Service {
            addr,
            shutdown: Some(tx),
            runtime: Some(runtime),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(rt) = self.runtime.take() {
            rt.shutdown_background();
        }
    }
}
