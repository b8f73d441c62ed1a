//! Benchmark decontamination.
//!
//! A document is contaminated by a benchmark item when it shares at least one
//! n-gram window with the item (candidate gate, `n = 13` by default) and the
//! longest common subsequence of the two word sequences covers at least
//! `min_ratio` of the item (`0.6` by default).
//!
//! Items shorter than `n` tokens are indexed by a single full-length window and
//! matched by windows of the same length in documents.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize_words, Document};
use crate::error::{Error, Result};
use crate::hashing::window_fingerprint;

pub const DEFAULT_NGRAM: usize = 13;
pub const DEFAULT_MIN_RATIO: f64 = 0.6;
pub const DEFAULT_WINDOW_GUARD: usize = 8192;
pub const DEFAULT_MAX_CANDIDATES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkItem {
    pub bench_id: String,
    pub suite: String,
    pub tokens: Vec<String>,
}

impl BenchmarkItem {
    pub fn new(bench_id: impl Into<String>, suite: impl Into<String>, tokens: Vec<String>) -> Result<Self> {
        let bench_id = bench_id.into();
        if tokens.is_empty() {
            return Err(Error::input(format!("benchmark item {bench_id:?} has no tokens")));
        }
        Ok(BenchmarkItem {
            bench_id,
            suite: suite.into(),
            tokens,
        })
    }

    /// Benchmarks are stored as shard records with the suite name in `source`.
    pub fn from_document(doc: &Document) -> Result<Self> {
        BenchmarkItem::new(doc.id.clone(), doc.source.clone(), tokenize_words(&doc.text))
    }
}

/// Immutable n-gram index over benchmark items.
#[derive(Debug, Clone)]
pub struct BenchmarkIndex {
    n: usize,
    items: Vec<BenchmarkItem>,
    /// fingerprint -> sorted, unique item positions
    postings: HashMap<u64, Vec<u32>>,
    /// Window lengths in use besides `n` (items shorter than `n`).
    short_lengths: BTreeSet<usize>,
}

impl BenchmarkIndex {
    pub fn build(items: Vec<BenchmarkItem>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("n-gram order must be at least 1"));
        }
        if items.is_empty() {
            return Err(Error::config("benchmark set is empty"));
        }
        let mut ids = HashSet::new();
        for item in &items {
            if !ids.insert(item.bench_id.as_str()) {
                return Err(Error::input(format!("duplicate benchmark id {:?}", item.bench_id)));
            }
        }
        let mut postings: HashMap<u64, Vec<u32>> = HashMap::new();
        let mut short_lengths = BTreeSet::new();
        for (pos, item) in items.iter().enumerate() {
            let pos = pos as u32;
            let width = if item.tokens.len() < n {
                short_lengths.insert(item.tokens.len());
                item.tokens.len()
            } else {
                n
            };
            for window in item.tokens.windows(width) {
                let list = postings.entry(window_fingerprint(window)).or_default();
                if list.last() != Some(&pos) {
                    list.push(pos);
                }
            }
        }
        Ok(BenchmarkIndex {
            n,
            items,
            postings,
            short_lengths,
        })
    }

    pub fn from_documents(docs: &[Document], n: usize) -> Result<Self> {
        let items = docs.iter().map(BenchmarkItem::from_document).collect::<Result<Vec<_>>>()?;
        BenchmarkIndex::build(items, n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn items(&self) -> &[BenchmarkItem] {
        &self.items
    }

    /// Number of distinct window fingerprints.
    pub fn posting_count(&self) -> usize {
        self.postings.len()
    }

    pub fn lookup(&self, fingerprint: u64) -> Option<impl Iterator<Item = &BenchmarkItem>> {
        self.postings
            .get(&fingerprint)
            .map(|list| list.iter().map(move |&p| &self.items[p as usize]))
    }

    /// Candidate items sharing at least one window with `tokens`, as
    /// `(item position, distinct shared fingerprints)`.
    fn candidates<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<(u32, usize)> {
        let mut shared: HashMap<u32, usize> = HashMap::new();
        let mut seen = HashSet::new();
        let widths = std::iter::once(self.n).chain(self.short_lengths.iter().copied());
        for width in widths {
            if tokens.len() < width {
                continue;
            }
            for window in tokens.windows(width) {
                let fp = window_fingerprint(window);
                if !seen.insert(fp) {
                    continue;
                }
                if let Some(list) = self.postings.get(&fp) {
                    for &p in list {
                        let width_ok = self.items[p as usize].tokens.len().min(self.n) == width;
                        if width_ok {
                            *shared.entry(p).or_default() += 1;
                        }
                    }
                }
            }
        }
        let mut out: Vec<(u32, usize)> = shared.into_iter().collect();
        out.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; short.len() + 1];
    for x in long {
        let mut diag = 0;
        for (j, y) in short.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[short.len()]
}

/// Denominator of the overlap ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioDenominator {
    /// `lcs / |benchmark item|`
    #[default]
    Benchmark,
    /// `lcs / min(|document|, |benchmark item|)`
    MinLength,
}

/// `lcs_len(doc, bench) / |bench|`.
pub fn overlap_ratio<S: AsRef<str>>(doc_tokens: &[S], bench: &BenchmarkItem) -> f64 {
    ratio_with(doc_tokens, &bench.tokens, RatioDenominator::Benchmark)
}

fn ratio_with<S: AsRef<str>>(doc: &[S], bench: &[String], denom: RatioDenominator) -> f64 {
    if bench.is_empty() {
        return 0.0;
    }
    let doc: Vec<&str> = doc.iter().map(AsRef::as_ref).collect();
    let bench: Vec<&str> = bench.iter().map(String::as_str).collect();
    let lcs = lcs_len(&doc, &bench);
    let d = match denom {
        RatioDenominator::Benchmark => bench.len(),
        RatioDenominator::MinLength => bench.len().min(doc.len()).max(1),
    };
    lcs as f64 / d as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecontamConfig {
    pub min_ratio: f64,
    /// Documents longer than this many tokens are scanned in windows of
    /// `2 * |item|` tokens with stride `|item|`.
    pub window_guard: usize,
    pub max_candidates: usize,
    pub denominator: RatioDenominator,
}

impl Default for DecontamConfig {
    fn default() -> Self {
        DecontamConfig {
            min_ratio: DEFAULT_MIN_RATIO,
            window_guard: DEFAULT_WINDOW_GUARD,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            denominator: RatioDenominator::Benchmark,
        }
    }
}

impl DecontamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_ratio > 0.0 && self.min_ratio <= 1.0) {
            return Err(Error::config(format!("min_ratio must be in (0, 1], got {}", self.min_ratio)));
        }
        if self.max_candidates == 0 {
            return Err(Error::config("max_candidates must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub bench_id: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub flagged: BTreeMap<String, Vec<Overlap>>,
    pub clean_count: usize,
    /// Documents whose candidate list was cut at `max_candidates`, with the
    /// number of candidates found.
    pub truncated: BTreeMap<String, usize>,
}

impl ContaminationReport {
    pub fn flagged_count(&self) -> usize {
        self.flagged.len()
    }
}

/// Result of checking one document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocumentCheck {
    pub overlaps: Vec<Overlap>,
    pub candidates_found: usize,
    pub truncated: bool,
}

/// Best overlap ratio of `bench` inside `doc`, with long documents windowed.
fn scan_ratio(doc: &[String], bench: &[String], cfg: &DecontamConfig) -> f64 {
    if doc.len() <= cfg.window_guard {
        return ratio_with(doc, bench, cfg.denominator);
    }
    let stride = bench.len();
    let size = 2 * bench.len();
    let mut best = 0.0f64;
    let mut start = 0;
    loop {
        let end = (start + size).min(doc.len());
        best = best.max(ratio_with(&doc[start..end], bench, cfg.denominator));
        if end == doc.len() || best >= 1.0 {
            break;
        }
        start += stride;
    }
    best
}

pub fn check_document(tokens: &[String], index: &BenchmarkIndex, cfg: &DecontamConfig) -> DocumentCheck {
    let candidates = index.candidates(tokens);
    let found = candidates.len();
    let mut check = DocumentCheck {
        candidates_found: found,
        truncated: found > cfg.max_candidates,
        ..Default::default()
    };
    for (pos, _) in candidates.into_iter().take(cfg.max_candidates) {
        let item = &index.items[pos as usize];
        let ratio = scan_ratio(tokens, &item.tokens, cfg);
        if ratio >= cfg.min_ratio {
            check.overlaps.push(Overlap {
                bench_id: item.bench_id.clone(),
                ratio,
            });
        }
    }
    check.overlaps.sort_by(|a, b| a.bench_id.cmp(&b.bench_id));
    check
}

/// Splits `corpus` into clean documents and a report of flagged ones.
pub fn decontaminate(
    corpus: Vec<Document>,
    index: &BenchmarkIndex,
    cfg: &DecontamConfig,
) -> Result<(Vec<Document>, ContaminationReport)> {
    cfg.validate()?;
    let checks: Vec<DocumentCheck> = corpus
        .par_iter()
        .map(|doc| check_document(&tokenize_words(&doc.text), index, cfg))
        .collect();
    let mut report = ContaminationReport::default();
    let mut clean = Vec::with_capacity(corpus.len());
    for (doc, check) in corpus.into_iter().zip(checks) {
        if check.truncated {
            report.truncated.insert(doc.id.clone(), check.candidates_found);
        }
        if check.overlaps.is_empty() {
            clean.push(doc);
        } else {
            report.flagged.insert(doc.id, check.overlaps);
        }
    }
    report.clean_count = clean.len();
    Ok((clean, report))
}
