//! Near-duplicate removal with MinHash LSH.
//!
//! The default configuration is one band of ten rows: two documents are
//! duplicates only when all ten minima agree, so a pair with Jaccard
//! similarity `J` collides with probability `J^10`. This targets
//! near-exact copies. Multi-band banding (`bands > 1`) is available
//! through [`DedupConfig`]; candidates from any band are merged with
//! union-find.
//!
//! Cluster representatives are the member with the lexicographically
//! smallest id, which makes the kept set independent of input order.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize_words, Document};
use crate::error::{Error, Result};
use crate::hashing::{counter_seeds, splitmix64, window_fingerprint};

pub const DEFAULT_NUM_HASHES: usize = 10;
pub const DEFAULT_SHINGLE_WIDTH: usize = 5;

/// Mersenne prime 2^61 - 1, modulus of the universal hash family.
const MERSENNE_61: u64 = (1 << 61) - 1;
/// Value used for every coordinate of the empty-set signature. Real minima are
/// always `< 2^61 - 1`, so it can never collide with a computed signature.
const SENTINEL: u64 = u64::MAX;

/// Fingerprints of every contiguous `width`-token window.
pub fn shingles<S: AsRef<str>>(tokens: &[S], width: usize) -> HashSet<u64> {
    if width == 0 || tokens.len() < width {
        return HashSet::new();
    }
    tokens.windows(width).map(window_fingerprint).collect()
}

/// Per-permutation minima of the seeded hash over a shingle set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MinHashSignature {
    minima: Vec<u64>,
}

impl MinHashSignature {
    pub fn sentinel(num_hashes: usize) -> Self {
        MinHashSignature {
            minima: vec![SENTINEL; num_hashes],
        }
    }

    pub fn is_sentinel(&self) -> bool {
        self.minima.iter().all(|&m| m == SENTINEL)
    }

    pub fn minima(&self) -> &[u64] {
        &self.minima
    }

    pub fn len(&self) -> usize {
        self.minima.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minima.is_empty()
    }
}

/// One member of the hash family `x -> (a*x + b) mod (2^61 - 1)`.
#[derive(Debug, Clone, Copy)]
struct UniversalHash {
    a: u64,
    b: u64,
}

impl UniversalHash {
    fn from_seed(seed: u64) -> Self {
        let a = splitmix64(seed) % (MERSENNE_61 - 1) + 1;
        let b = splitmix64(seed ^ 0xD6E8_FEB8_6659_FD93) % MERSENNE_61;
        UniversalHash { a, b }
    }

    #[inline]
    fn hash(self, x: u64) -> u64 {
        let x = x % MERSENNE_61;
        let v = self.a as u128 * x as u128 + self.b as u128;
        (v % MERSENNE_61 as u128) as u64
    }
}

/// Computes a signature with one hash permutation per seed.
///
/// `seeds.len()` must equal `num_hashes`.
pub fn signature(shingles: &HashSet<u64>, seeds: &[u64], num_hashes: usize) -> Result<MinHashSignature> {
    if num_hashes == 0 || seeds.len() != num_hashes {
        return Err(Error::config(format!(
            "expected {num_hashes} seeds, got {}",
            seeds.len()
        )));
    }
    let family: Vec<UniversalHash> = seeds.iter().map(|&s| UniversalHash::from_seed(s)).collect();
    Ok(signature_with(shingles, &family))
}

fn signature_with(shingles: &HashSet<u64>, family: &[UniversalHash]) -> MinHashSignature {
    if shingles.is_empty() {
        return MinHashSignature::sentinel(family.len());
    }
    let mut minima = vec![u64::MAX; family.len()];
    for &s in shingles {
        for (slot, h) in minima.iter_mut().zip(family) {
            let v = h.hash(s);
            if v < *slot {
                *slot = v;
            }
        }
    }
    MinHashSignature { minima }
}

/// Fraction of coordinates on which two signatures agree.
pub fn jaccard_estimate(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::input(format!(
            "signature lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_sentinel() || b.is_sentinel() {
        return Err(Error::input("cannot estimate similarity of an empty shingle set"));
    }
    let agree = a.minima.iter().zip(&b.minima).filter(|(x, y)| x == y).count();
    Ok(agree as f64 / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupConfig {
    pub shingle_width: usize,
    pub num_hashes: usize,
    /// Number of LSH bands; `num_hashes` must be divisible by it.
    pub bands: usize,
    pub master_seed: u64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            shingle_width: DEFAULT_SHINGLE_WIDTH,
            num_hashes: DEFAULT_NUM_HASHES,
            bands: 1,
            master_seed: 0,
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shingle_width == 0 {
            return Err(Error::config("shingle width must be at least 1"));
        }
        if self.num_hashes == 0 {
            return Err(Error::config("num_hashes must be at least 1"));
        }
        if self.bands == 0 || self.num_hashes % self.bands != 0 {
            return Err(Error::config(format!(
                "num_hashes {} is not divisible into {} bands",
                self.num_hashes, self.bands
            )));
        }
        Ok(())
    }

    pub fn rows_per_band(&self) -> usize {
        self.num_hashes / self.bands
    }

    pub fn seeds(&self) -> Vec<u64> {
        counter_seeds(self.master_seed, self.num_hashes)
    }
}

/// Precomputed hash family for one configuration.
#[derive(Debug, Clone)]
pub struct MinHasher {
    width: usize,
    family: Vec<UniversalHash>,
}

impl MinHasher {
    pub fn new(config: &DedupConfig) -> Result<Self> {
        config.validate()?;
        Ok(MinHasher {
            width: config.shingle_width,
            family: config.seeds().into_iter().map(UniversalHash::from_seed).collect(),
        })
    }

    pub fn signature_of_text(&self, text: &str) -> MinHashSignature {
        let tokens = tokenize_words(text);
        signature_with(&shingles(&tokens, self.width), &self.family)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupReport {
    pub kept: Vec<String>,
    /// dropped id -> id of the kept cluster representative
    pub dropped: BTreeMap<String, String>,
    pub cluster_count: usize,
    /// Documents too short to produce a shingle; always kept.
    pub sentinel_count: usize,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Removes near-duplicates. Output keeps input order restricted to kept ids.
pub fn dedup(documents: Vec<Document>, config: &DedupConfig) -> Result<(Vec<Document>, DedupReport)> {
    let hasher = MinHasher::new(config)?;
    let mut seen = HashSet::with_capacity(documents.len());
    for doc in &documents {
        if !seen.insert(doc.id.as_str()) {
            return Err(Error::input(format!("duplicate document id {:?}", doc.id)));
        }
    }
    drop(seen);

    let signatures: Vec<MinHashSignature> = documents
        .par_iter()
        .map(|d| hasher.signature_of_text(&d.text))
        .collect();

    let rows = config.rows_per_band();
    let mut sets = DisjointSet::new(documents.len());
    for band in 0..config.bands {
        let mut first_in_bucket: HashMap<&[u64], usize> = HashMap::new();
        for (i, sig) in signatures.iter().enumerate() {
            if sig.is_sentinel() {
                continue;
            }
            let key = &sig.minima[band * rows..(band + 1) * rows];
            match first_in_bucket.get(key) {
                Some(&j) => sets.union(i, j),
                None => {
                    first_in_bucket.insert(key, i);
                }
            }
        }
    }

    // root -> index of the member with the smallest id
    let mut representative: HashMap<usize, usize> = HashMap::new();
    let mut sentinel_count = 0;
    for (i, sig) in signatures.iter().enumerate() {
        if sig.is_sentinel() {
            sentinel_count += 1;
            continue;
        }
        let root = sets.find(i);
        representative
            .entry(root)
            .and_modify(|r| {
                if documents[i].id < documents[*r].id {
                    *r = i;
                }
            })
            .or_insert(i);
    }

    let mut report = DedupReport {
        cluster_count: representative.len(),
        sentinel_count,
        ..Default::default()
    };
    let mut keep = vec![true; documents.len()];
    for (i, sig) in signatures.iter().enumerate() {
        if sig.is_sentinel() {
            continue;
        }
        let rep = representative[&sets.find(i)];
        if rep != i {
            keep[i] = false;
            report
                .dropped
                .insert(documents[i].id.clone(), documents[rep].id.clone());
        }
    }
    let kept: Vec<Document> = documents
        .into_iter()
        .zip(keep)
        .filter_map(|(d, k)| k.then_some(d))
        .collect();
    report.kept = kept.iter().map(|d| d.id.clone()).collect();
    Ok((kept, report))
}
