//! Matrix-factorization baseline on implicit feedback.
//!
//! Observed (user, movie) likes are positives with label 1; each positive
//! is paired with sampled unliked movies labelled 0. The objective is
//!
//! ```text
//! L = Σ_(u,i,r) (r − p_u·q_i)² + λ(‖p_u‖² + ‖q_i‖²)
//! ```
//!
//! minimized by per-sample SGD. Negatives are drawn once before training so
//! the loss reported per epoch is measured on a fixed sample set.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub epochs: usize,
    pub negatives_per_positive: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for MfConfig {
    fn default() -> Self {
        MfConfig {
            dim: 32,
            learning_rate: 0.05,
            regularization: 0.01,
            epochs: 30,
            negatives_per_positive: 1,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub user: usize,
    pub item: usize,
    pub label: f64,
}

/// Dense user/item indices plus the labelled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub user_ids: Vec<u32>,
    pub item_ids: Vec<u32>,
    pub samples: Vec<Sample>,
}

impl TrainingSet {
    /// Positives from the distinct `(user, movie)` pairs, each followed by
    /// `negatives` movies the user did not like, drawn uniformly under
    /// `seed`. Users who liked every movie get no negatives.
    pub fn from_pairs(pairs: &[(u32, u32)], negatives: usize, seed: u64) -> Self {
        let distinct: BTreeSet<(u32, u32)> = pairs.iter().copied().collect();
        let user_ids: Vec<u32> = distinct.iter().map(|p| p.0).collect::<BTreeSet<_>>().into_iter().collect();
        let item_ids: Vec<u32> = distinct.iter().map(|p| p.1).collect::<BTreeSet<_>>().into_iter().collect();
        let user_ix: HashMap<u32, usize> = user_ids.iter().enumerate().map(|(i, u)| (*u, i)).collect();
        let item_ix: HashMap<u32, usize> = item_ids.iter().enumerate().map(|(i, m)| (*m, i)).collect();

        let mut liked: Vec<HashSet<usize>> = vec![HashSet::new(); user_ids.len()];
        for (u, m) in &distinct {
            liked[user_ix[u]].insert(item_ix[m]);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::with_capacity(distinct.len() * (1 + negatives));
        for (u, m) in &distinct {
            let user = user_ix[u];
            samples.push(Sample {
                user,
                item: item_ix[m],
                label: 1.0,
            });
            if liked[user].len() == item_ids.len() {
                continue;
            }
            for _ in 0..negatives {
                let item = loop {
                    let candidate = rng.random_range(0..item_ids.len());
                    if !liked[user].contains(&candidate) {
                        break candidate;
                    }
                };
                samples.push(Sample {
                    user,
                    item,
                    label: 0.0,
                });
            }
        }
        TrainingSet {
            user_ids,
            item_ids,
            samples,
        }
    }
}

/// The regularized squared loss over a fixed sample set, with its exact
/// gradient. Factor matrices are row-major `rows × dim`.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub samples: &'a [Sample],
    pub dim: usize,
    pub regularization: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

impl Objective<'_> {
    pub fn loss(&self, users: &[f64], items: &[f64]) -> f64 {
        let d = self.dim;
        self.samples
            .iter()
            .map(|s| {
                let p = &users[s.user * d..(s.user + 1) * d];
                let q = &items[s.item * d..(s.item + 1) * d];
                let err = s.label - dot(p, q);
                err * err + self.regularization * (norm_sq(p) + norm_sq(q))
            })
            .sum()
    }

    /// `(∂L/∂users, ∂L/∂items)`.
    pub fn gradient(&self, users: &[f64], items: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut gu = vec![0.0; users.len()];
        let mut gi = vec![0.0; items.len()];
        for s in self.samples {
            let p = &users[s.user * d..(s.user + 1) * d];
            let q = &items[s.item * d..(s.item + 1) * d];
            let err = s.label - dot(p, q);
            for k in 0..d {
                gu[s.user * d + k] += -2.0 * err * q[k] + 2.0 * self.regularization * p[k];
                gi[s.item * d + k] += -2.0 * err * p[k] + 2.0 * self.regularization * q[k];
            }
        }
        (gu, gi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfModel {
    pub config: MfConfig,
    pub user_ids: Vec<u32>,
    pub item_ids: Vec<u32>,
    /// `user_ids.len() × dim`, row-major.
    pub users: Vec<f64>,
    /// `item_ids.len() × dim`, row-major.
    pub items: Vec<f64>,
    /// Training loss before the first epoch and after each epoch.
    pub loss_history: Vec<f64>,
    item_index: HashMap<u32, usize>,
}

/// Which of two candidates a pair decision picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pick {
    First,
    Second,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = norm_sq(a).sqrt() * norm_sq(b).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}

fn init(rows: usize, dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, scale).expect("finite positive scale");
    (0..rows * dim).map(|_| normal.sample(rng)).collect()
}

/// Trains on liked `(user, movie)` pairs.
pub fn train_mf(pairs: &[(u32, u32)], config: &MfConfig) -> Result<MfModel> {
    let set = TrainingSet::from_pairs(pairs, config.negatives_per_positive, config.seed);
    MfModel::train(&set, config)
}

impl MfModel {
    pub fn train(set: &TrainingSet, config: &MfConfig) -> Result<MfModel> {
        if config.dim == 0 {
            return Err(Error::Invalid("factor dimension must be at least 1".into()));
        }
        if config.learning_rate.is_nan() || config.learning_rate <= 0.0 || config.regularization.is_nan() || config.regularization < 0.0 {
            return Err(Error::Invalid("learning rate must be > 0 and regularization >= 0".into()));
        }
        let d = config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        let mut users = init(set.user_ids.len(), d, config.init_scale, &mut rng);
        let mut items = init(set.item_ids.len(), d, config.init_scale, &mut rng);
        let objective = Objective {
            samples: &set.samples,
            dim: d,
            regularization: config.regularization,
        };

        let mut loss_history = vec![objective.loss(&users, &items)];
        let mut order: Vec<usize> = (0..set.samples.len()).collect();
        let (lr, reg) = (config.learning_rate, config.regularization);
        for epoch in 1..=config.epochs {
            order.shuffle(&mut rng);
            for &idx in &order {
                let s = set.samples[idx];
                let (pu, qi) = (s.user * d, s.item * d);
                let err = s.label - dot(&users[pu..pu + d], &items[qi..qi + d]);
                for k in 0..d {
                    let p = users[pu + k];
                    let q = items[qi + k];
                    users[pu + k] -= lr * (-2.0 * err * q + 2.0 * reg * p);
                    items[qi + k] -= lr * (-2.0 * err * p + 2.0 * reg * q);
                }
            }
            let loss = objective.loss(&users, &items);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            loss_history.push(loss);
        }
        Ok(MfModel::from_parts(
            config.clone(),
            set.user_ids.clone(),
            set.item_ids.clone(),
            users,
            items,
            loss_history,
        ))
    }

    pub fn from_parts(
        config: MfConfig,
        user_ids: Vec<u32>,
        item_ids: Vec<u32>,
        users: Vec<f64>,
        items: Vec<f64>,
        loss_history: Vec<f64>,
    ) -> Self {
        let item_index = item_ids.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        MfModel {
            config,
            user_ids,
            item_ids,
            users,
            items,
            loss_history,
            item_index,
        }
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }

    pub fn item_vector(&self, movie: u32) -> Option<&[f64]> {
        let d = self.config.dim;
        self.item_index.get(&movie).map(|&i| &self.items[i * d..(i + 1) * d])
    }

    pub fn contains(&self, movie: u32) -> bool {
        self.item_index.contains_key(&movie)
    }

    pub fn similarity(&self, a: u32, b: u32) -> Result<f64> {
        let va = self.item_vector(a).ok_or_else(|| Error::UnknownMovie(a.to_string()))?;
        let vb = self.item_vector(b).ok_or_else(|| Error::UnknownMovie(b.to_string()))?;
        Ok(cosine(va, vb))
    }

    /// The `k` most cosine-similar items to `movie`, excluding itself.
    pub fn similar_items(&self, movie: u32, k: usize) -> Result<Vec<(u32, f64)>> {
        let v = self.item_vector(movie).ok_or_else(|| Error::UnknownMovie(movie.to_string()))?;
        let d = self.config.dim;
        let mut scored: Vec<(u32, f64)> = self
            .item_ids
            .iter()
            .enumerate()
            .filter(|(_, m)| **m != movie)
            .map(|(i, m)| (*m, cosine(v, &self.items[i * d..(i + 1) * d])))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    /// Writes the factor file:
    ///
    /// ```text
    /// magic      8 bytes  "CRSMF\0v1"
    /// n_items    u32 LE
    /// n_users    u32 LE
    /// dim        u32 LE
    /// seed       u64 LE
    /// item ids   n_items × u32 LE
    /// user ids   n_users × u32 LE
    /// items      n_items × dim × f64 LE, row-major
    /// users      n_users × dim × f64 LE, row-major
    /// ```
    pub fn write_binary(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.item_ids.len() as u32).to_le_bytes())?;
        out.write_all(&(self.user_ids.len() as u32).to_le_bytes())?;
        out.write_all(&(self.config.dim as u32).to_le_bytes())?;
        out.write_all(&self.config.seed.to_le_bytes())?;
        for id in self.item_ids.iter().chain(&self.user_ids) {
            out.write_all(&id.to_le_bytes())?;
        }
        for x in self.items.iter().chain(&self.users) {
            out.write_all(&x.to_le_bytes())?;
        }
        out.flush()
    }

    /// Reads a factor file. Hyperparameters other than `dim` and `seed`
    /// come from `config`.
    pub fn read_binary(mut input: impl Read, mut config: MfConfig, loss_history: Vec<f64>) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Store("factor file has a bad magic number".into()));
        }
        let n_items = read_u32(&mut input)? as usize;
        let n_users = read_u32(&mut input)? as usize;
        let dim = read_u32(&mut input)? as usize;
        let mut seed = [0u8; 8];
        input.read_exact(&mut seed)?;
        config.dim = dim;
        config.seed = u64::from_le_bytes(seed);
        let item_ids = (0..n_items).map(|_| read_u32(&mut input)).collect::<std::io::Result<Vec<_>>>()?;
        let user_ids = (0..n_users).map(|_| read_u32(&mut input)).collect::<std::io::Result<Vec<_>>>()?;
        let items = read_f64s(&mut input, n_items * dim)?;
        let users = read_f64s(&mut input, n_users * dim)?;
        if items.iter().chain(&users).any(|x| !x.is_finite()) {
            return Err(Error::Store("factor file contains non-finite values".into()));
        }
        Ok(MfModel::from_parts(config, user_ids, item_ids, users, items, loss_history))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let bin = dir.join(super::store::MF_BIN);
        let file = std::fs::File::create(&bin).map_err(|e| Error::io(&bin, e))?;
        self.write_binary(std::io::BufWriter::new(file)).map_err(|e| Error::io(&bin, e))?;
        crate::jsonl::write_json(
            &dir.join(super::store::MF_JSON),
            &MfSidecar {
                config: self.config.clone(),
                loss_history: self.loss_history.clone(),
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let sidecar: MfSidecar = crate::jsonl::read_json(&dir.join(super::store::MF_JSON))?;
        let bin = dir.join(super::store::MF_BIN);
        let file = std::fs::File::open(&bin).map_err(|e| Error::io(&bin, e))?;
        Self::read_binary(std::io::BufReader::new(file), sidecar.config, sidecar.loss_history)
    }
}

#[derive(Serialize, Deserialize)]
struct MfSidecar {
    config: MfConfig,
    loss_history: Vec<f64>,
}

const MAGIC: &[u8; 8] = b"CRSMF\0v1";

fn read_u32(input: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s(input: &mut impl Read, n: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    input.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Picks the candidate whose item factors are more cosine-similar to the
/// query's. An exact tie goes to the first candidate.
pub fn mf_pair_decision(query: u32, first: u32, second: u32, model: &MfModel) -> Result<Pick> {
    let s1 = model.similarity(query, first)?;
    let s2 = model.similarity(query, second)?;
    Ok(if s2 > s1 { Pick::Second } else { Pick::First })
}
