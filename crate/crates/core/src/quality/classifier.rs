//! Hashed bag-of-n-grams linear regressor over the 0-5 quality scale.
//!
//! Features are signed hashes of word n-grams (orders 1 and 2 by default)
//! folded into `2^feature_bits` buckets and L2-normalized. The model is fit
//! with plain SGD on squared error against the integer label, visiting the
//! training set in a seeded order each epoch. Training is single-threaded
//! so that weights are a pure function of (data order, config).

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{score_bucket, tokenize_words, MAX_QUALITY_SCORE};
use crate::error::{Error, Result};
use crate::hashing::{derive_seed, window_fingerprint_seeded};

const MAGIC: &[u8; 4] = b"HNGC";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub feature_bits: u32,
    pub ngram_orders: Vec<usize>,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub holdout_fraction: f64,
    /// Binary threshold used for the held-out F1 (bucket >= threshold is positive).
    pub threshold: u8,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            feature_bits: 20,
            ngram_orders: vec![1, 2],
            seed: 0,
            epochs: 10,
            learning_rate: 0.5,
            l2: 0.0,
            holdout_fraction: 0.1,
            threshold: 3,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(1..=30).contains(&self.feature_bits) {
            return Err(Error::config(format!("feature_bits must be in 1..=30, got {}", self.feature_bits)));
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.contains(&0) {
            return Err(Error::config("ngram orders must be a nonempty set of positive integers"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config("l2 must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::config("holdout_fraction must be in [0, 1)"));
        }
        if self.threshold > 5 {
            return Err(Error::config("threshold must be in 0..=5"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    feature_dim: usize,
    weights: Vec<f64>,
    bias: f64,
    ngram_orders: Vec<usize>,
    seed: u64,
}

/// Sparse, L2-normalized feature vector sorted by index.
type Features = Vec<(u32, f64)>;

impl ClassifierModel {
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn ngram_orders(&self) -> &[usize] {
        &self.ngram_orders
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn features(&self, text: &str) -> Features {
        extract_features(text, &self.ngram_orders, self.feature_dim, self.seed)
    }

    fn raw_predict(&self, features: &Features) -> f64 {
        self.bias
            + features
                .iter()
                .map(|&(i, v)| self.weights[i as usize] * v)
                .sum::<f64>()
    }

    /// Clamped score in `[0, 5]`.
    pub fn score(&self, text: &str) -> f64 {
        self.raw_predict(&self.features(text)).clamp(0.0, MAX_QUALITY_SCORE)
    }

    /// Integer bucket of [`score`](Self::score), rounding half up.
    pub fn bucket(&self, text: &str) -> u8 {
        score_bucket(self.score(text))
    }

    /// Versioned little-endian binary encoding. Only nonzero weights are stored.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.feature_dim as u64).to_le_bytes())?;
        w.write_all(&(self.ngram_orders.len() as u32).to_le_bytes())?;
        for &o in &self.ngram_orders {
            w.write_all(&(o as u32).to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.bias.to_le_bytes())?;
        let nonzero: Vec<(usize, f64)> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        w.write_all(&(nonzero.len() as u64).to_le_bytes())?;
        for (i, v) in nonzero {
            w.write_all(&(i as u32).to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(Error::input("not a classifier model file (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::input(format!("unsupported model version {version}")));
        }
        let feature_dim = read_u64(&mut r)? as usize;
        if !feature_dim.is_power_of_two() || feature_dim > 1 << 30 {
            return Err(Error::input(format!("feature_dim {feature_dim} is not a supported power of two")));
        }
        let n_orders = read_u32(&mut r)? as usize;
        if n_orders == 0 || n_orders > 16 {
            return Err(Error::input(format!("invalid n-gram order count {n_orders}")));
        }
        let mut ngram_orders = Vec::with_capacity(n_orders);
        for _ in 0..n_orders {
            ngram_orders.push(read_u32(&mut r)? as usize);
        }
        let seed = read_u64(&mut r)?;
        let bias = f64::from_le_bytes(read_array(&mut r)?);
        let nnz = read_u64(&mut r)? as usize;
        if nnz > feature_dim {
            return Err(Error::input("more stored weights than features"));
        }
        let mut weights = vec![0.0; feature_dim];
        for _ in 0..nnz {
            let i = read_u32(&mut r)? as usize;
            let v = f64::from_le_bytes(read_array(&mut r)?);
            if i >= feature_dim {
                return Err(Error::input(format!("weight index {i} out of range")));
            }
            weights[i] = v;
        }
        Ok(ClassifierModel {
            feature_dim,
            weights,
            bias,
            ngram_orders,
            seed,
        })
    }
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::input("truncated model file")
    } else {
        Error::Io(e)
    }
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn extract_features(text: &str, orders: &[usize], dim: usize, seed: u64) -> Features {
    let tokens = tokenize_words(text);
    let mask = (dim - 1) as u64;
    let mut raw: Vec<(u32, f64)> = Vec::new();
    for &order in orders {
        if tokens.len() < order {
            continue;
        }
        let order_seed = seed ^ (order as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        for window in tokens.windows(order) {
            let h = window_fingerprint_seeded(window, order_seed);
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            raw.push(((h & mask) as u32, sign));
        }
    }
    raw.sort_unstable_by_key(|&(i, _)| i);
    let mut merged: Features = Vec::with_capacity(raw.len());
    for (i, v) in raw {
        match merged.last_mut() {
            Some((j, acc)) if *j == i => *acc += v,
            _ => merged.push((i, v)),
        }
    }
    merged.retain(|&(_, v)| v != 0.0);
    let norm = merged.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in &mut merged {
            *v /= norm;
        }
    }
    merged
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: ClassifierModel,
    /// F1 of `bucket >= threshold` on the held-out split; `None` when the split
    /// is empty or has neither actual nor predicted positives.
    pub holdout_f1: Option<f64>,
    pub threshold: u8,
    pub train_size: usize,
    pub holdout_size: usize,
}

/// Fits the regressor. `labeled` holds `(text, score)` pairs with scores in `0..=5`.
pub fn train_classifier<S: AsRef<str>>(labeled: &[(S, u8)], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if labeled.iter().any(|(_, y)| *y > 5) {
        return Err(Error::Training("labels must be in 0..=5".into()));
    }
    let distinct: BTreeSet<u8> = labeled.iter().map(|(_, y)| *y).collect();
    if distinct.len() < 2 {
        return Err(Error::Training(format!(
            "need at least two distinct labels, found {}",
            distinct.len()
        )));
    }

    let mut orders = config.ngram_orders.clone();
    orders.sort_unstable();
    orders.dedup();
    let dim = 1usize << config.feature_bits;
    let features: Vec<Features> = labeled
        .iter()
        .map(|(t, _)| extract_features(t.as_ref(), &orders, dim, config.seed))
        .collect();

    let mut order: Vec<usize> = (0..labeled.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "holdout")));
    let mut holdout_size = (labeled.len() as f64 * config.holdout_fraction).round() as usize;
    holdout_size = holdout_size.min(labeled.len() - 1);
    let (holdout, train) = order.split_at(holdout_size);
    let mut train = train.to_vec();
    // Restore data order so that training visits examples deterministically
    // relative to the caller's ordering.
    train.sort_unstable();

    let mean = train.iter().map(|&i| labeled[i].1 as f64).sum::<f64>() / train.len() as f64;
    let mut model = ClassifierModel {
        feature_dim: dim,
        weights: vec![0.0; dim],
        bias: mean,
        ngram_orders: orders,
        seed: config.seed,
    };

    for epoch in 0..config.epochs {
        let mut visit = train.clone();
        visit.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("epoch/{epoch}"))));
        let lr = config.learning_rate / (1.0 + epoch as f64).sqrt();
        for &i in &visit {
            let x = &features[i];
            let err = model.raw_predict(x) - labeled[i].1 as f64;
            for &(j, v) in x {
                let w = &mut model.weights[j as usize];
                *w -= lr * (err * v + config.l2 * *w);
            }
            model.bias -= lr * err;
        }
    }

    let holdout_f1 = f1_at_threshold(
        holdout.iter().map(|&i| {
            let pred = score_bucket(model.raw_predict(&features[i]).clamp(0.0, MAX_QUALITY_SCORE));
            (labeled[i].1 >= config.threshold, pred >= config.threshold)
        }),
    );
    Ok(TrainReport {
        model,
        holdout_f1,
        threshold: config.threshold,
        train_size: train.len(),
        holdout_size,
    })
}

/// F1 over `(actual, predicted)` pairs.
pub(crate) fn f1_at_threshold<I: IntoIterator<Item = (bool, bool)>>(pairs: I) -> Option<f64> {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (actual, predicted) in pairs {
        match (actual, predicted) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fneg;
    (denom > 0).then(|| 2.0 * tp as f64 / denom as f64)
}

/// Clamped score of `text` under `model`.
pub fn classify(model: &ClassifierModel, text: &str) -> f64 {
    model.score(text)
}
