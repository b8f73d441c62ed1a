//! Deterministic multi-source sampling that realizes a [`StagePlan`].
//!
//! Each source is walked in a seeded per-epoch permutation. The next source is
//! the one furthest behind its token target, relative to that target, so
//! realized shares track the plan weights to within one document per source.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::hashing::derive_seed;
use crate::mixture::StagePlan;

/// Default minimum length for long-context documents.
pub const DEFAULT_LONG_CONTEXT_TOKENS: u64 = 8192;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Largest relative deficit first, seeded tie-breaking.
    #[default]
    Deficit,
    /// Random draw weighted by remaining token deficit.
    Proportional,
}

/// One emitted document with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw<'a> {
    pub seq: u64,
    pub source: &'a str,
    /// Zero-based pass over the source this document belongs to.
    pub epoch: u64,
    pub doc: &'a Document,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceState {
    pub epoch: u64,
    pub cursor: usize,
    pub permutation_seed: u64,
}

/// Snapshot of a sampler's position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerState {
    pub seed: u64,
    pub per_source: BTreeMap<String, SourceState>,
    pub tokens_emitted: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceSummary {
    pub weight: f64,
    pub target_tokens: u64,
    pub emitted_tokens: u64,
    pub documents: u64,
    /// Emitted tokens over the source's total tokens.
    pub epochs: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub stage: String,
    pub seed: u64,
    pub mode: SamplingMode,
    pub token_budget: u64,
    pub emitted_tokens: u64,
    pub documents: u64,
    pub per_source: BTreeMap<String, SourceSummary>,
}

struct Lane<'a> {
    name: &'a str,
    docs: Vec<&'a Document>,
    source_tokens: u64,
    weight: f64,
    target: u64,
    emitted: u64,
    documents: u64,
    epoch: u64,
    cursor: usize,
    permutation_seed: u64,
    order: Vec<u32>,
    rank: u64,
}

impl<'a> Lane<'a> {
    fn active(&self) -> bool {
        self.emitted < self.target
    }

    fn deficit(&self) -> u64 {
        self.target.saturating_sub(self.emitted)
    }

    fn reshuffle(&mut self, master: u64) {
        self.permutation_seed = derive_seed(master, &format!("sampler/{}/{}", self.name, self.epoch));
        let mut rng = ChaCha8Rng::seed_from_u64(self.permutation_seed);
        self.order = (0..self.docs.len() as u32).collect();
        self.order.shuffle(&mut rng);
        self.cursor = 0;
    }

    fn next_doc(&mut self, master: u64) -> (u64, &'a Document) {
        if self.cursor == self.order.len() {
            self.epoch += 1;
            self.reshuffle(master);
        }
        let doc = self.docs[self.order[self.cursor] as usize];
        self.cursor += 1;
        let epoch = self.epoch;
        self.emitted += doc.token_count;
        self.documents += 1;
        (epoch, doc)
    }
}

/// A lazy, deterministic document stream for one stage.
pub struct Sampler<'a> {
    stage: String,
    seed: u64,
    mode: SamplingMode,
    budget: u64,
    lanes: Vec<Lane<'a>>,
    rng: ChaCha8Rng,
    seq: u64,
}

impl<'a> Sampler<'a> {
    /// Documents below a source's `min_doc_tokens` entry are excluded before
    /// sampling. Sources with positive weight must keep at least one document
    /// with a nonzero token count.
    pub fn new(
        sources: &'a BTreeMap<String, Vec<Document>>,
        plan: &'a StagePlan,
        seed: u64,
        mode: SamplingMode,
    ) -> Result<Self> {
        let mut lanes = Vec::new();
        for (name, weight) in &plan.weights {
            if weight.is_negative() {
                return Err(Error::config(format!("negative weight for {name}")));
            }
            let target = weight.floor_tokens(plan.token_budget);
            if weight.is_zero() {
                continue;
            }
            let docs = sources
                .get(name)
                .ok_or_else(|| Error::config(format!("no documents supplied for source {name}")))?;
            let min = plan.min_doc_tokens.get(name).copied().unwrap_or(0);
            let docs: Vec<&Document> = docs.iter().filter(|d| d.token_count >= min).collect();
            let source_tokens: u64 = docs.iter().map(|d| d.token_count).sum();
            if source_tokens == 0 {
                return Err(Error::config(format!(
                    "source {name} has positive weight but no documents with tokens (minimum length {min})"
                )));
            }
            if docs.len() > u32::MAX as usize {
                return Err(Error::config(format!("source {name} has too many documents")));
            }
            let mut lane = Lane {
                name: name.as_str(),
                docs,
                source_tokens,
                weight: weight.to_f64(),
                target,
                emitted: 0,
                documents: 0,
                epoch: 0,
                cursor: 0,
                permutation_seed: 0,
                order: Vec::new(),
                rank: derive_seed(seed, &format!("sampler/rank/{name}")),
            };
            lane.reshuffle(seed);
            lanes.push(lane);
        }
        Ok(Sampler {
            stage: plan.name.clone(),
            seed,
            mode,
            budget: plan.token_budget,
            lanes,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, "sampler/select")),
            seq: 0,
        })
    }

    fn pick(&mut self) -> Option<usize> {
        match self.mode {
            SamplingMode::Deficit => {
                let mut best: Option<usize> = None;
                for (i, lane) in self.lanes.iter().enumerate().filter(|(_, l)| l.active()) {
                    best = Some(match best {
                        None => i,
                        Some(b) => {
                            let cur = &self.lanes[b];
                            // deficit_i / target_i vs deficit_b / target_b, exactly.
                            let lhs = lane.deficit() as u128 * cur.target as u128;
                            let rhs = cur.deficit() as u128 * lane.target as u128;
                            if lhs > rhs || (lhs == rhs && lane.rank < cur.rank) {
                                i
                            } else {
                                b
                            }
                        }
                    });
                }
                best
            }
            SamplingMode::Proportional => {
                let total: u128 = self.lanes.iter().map(|l| l.deficit() as u128).sum();
                if total == 0 {
                    return None;
                }
                let mut ticket = self.rng.gen_range(0..total);
                for (i, lane) in self.lanes.iter().enumerate() {
                    let d = lane.deficit() as u128;
                    if ticket < d {
                        return Some(i);
                    }
                    ticket -= d;
                }
                unreachable!("ticket below total deficit")
            }
        }
    }

    pub fn state(&self) -> SamplerState {
        SamplerState {
            seed: self.seed,
            per_source: self
                .lanes
                .iter()
                .map(|l| {
                    let state = SourceState {
                        epoch: l.epoch,
                        cursor: l.cursor,
                        permutation_seed: l.permutation_seed,
                    };
                    (l.name.to_owned(), state)
                })
                .collect(),
            tokens_emitted: self.lanes.iter().map(|l| (l.name.to_owned(), l.emitted)).collect(),
        }
    }

    pub fn summary(&self) -> SampleSummary {
        let emitted: u64 = self.lanes.iter().map(|l| l.emitted).sum();
        SampleSummary {
            stage: self.stage.clone(),
            seed: self.seed,
            mode: self.mode,
            token_budget: self.budget,
            emitted_tokens: emitted,
            documents: self.seq,
            per_source: self
                .lanes
                .iter()
                .map(|l| {
                    let s = SourceSummary {
                        weight: l.weight,
                        target_tokens: l.target,
                        emitted_tokens: l.emitted,
                        documents: l.documents,
                        epochs: l.emitted as f64 / l.source_tokens as f64,
                        share: if emitted == 0 { 0.0 } else { l.emitted as f64 / emitted as f64 },
                    };
                    (l.name.to_owned(), s)
                })
                .collect(),
        }
    }
}

impl<'a> Iterator for Sampler<'a> {
    type Item = Draw<'a>;

    fn next(&mut self) -> Option<Draw<'a>> {
        let i = self.pick()?;
        let seed = self.seed;
        let lane = &mut self.lanes[i];
        let (epoch, doc) = lane.next_doc(seed);
        let draw = Draw {
            seq: self.seq,
            source: lane.name,
            epoch,
            doc,
        };
        self.seq += 1;
        Some(draw)
    }
}

/// Splits a plan into `parts` sub-plans with equal budget shares and derived
/// seeds. Each part is an independent stream; concatenating them in part
/// order is the fixed interleave.
pub fn split_plan(plan: &StagePlan, parts: usize, seed: u64) -> Result<Vec<(StagePlan, u64)>> {
    if parts == 0 {
        return Err(Error::config("parts must be at least 1"));
    }
    let base = plan.token_budget / parts as u64;
    let extra = (plan.token_budget % parts as u64) as usize;
    Ok((0..parts)
        .map(|i| {
            let mut sub = plan.with_budget(base + u64::from(i < extra));
            sub.name = format!("{}/part{i}", plan.name);
            (sub, derive_seed(seed, &format!("sampler/part/{i}")))
        })
        .collect())
}

/// Keeps documents with at least `min_tokens` tokens.
pub fn long_context_filter(documents: Vec<Document>, min_tokens: u64) -> Vec<Document> {
    documents.into_iter().filter(|d| d.token_count >= min_tokens).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackReport {
    pub sequence_length: u64,
    pub documents: u64,
    pub total_tokens: u64,
    pub sequences: u64,
    /// Documents that span more than one sequence.
    pub split_documents: u64,
    /// Sequence boundaries that fall inside a document.
    pub boundary_crossings: u64,
    /// Unused tokens in the last sequence.
    pub padding_tokens: u64,
}

/// Greedy back-to-back packing of documents into fixed-length sequences.
/// Documents are split at sequence boundaries; nothing is tokenized.
pub fn pack_accounting(token_counts: impl IntoIterator<Item = u64>, sequence_length: u64) -> Result<PackReport> {
    if sequence_length == 0 {
        return Err(Error::config("sequence_length must be at least 1"));
    }
    let mut r = PackReport {
        sequence_length,
        ..PackReport::default()
    };
    for t in token_counts {
        r.documents += 1;
        if t == 0 {
            continue;
        }
        let start = r.total_tokens;
        let end = start + t - 1;
        let crossings = end / sequence_length - start / sequence_length;
        r.boundary_crossings += crossings;
        r.split_documents += u64::from(crossings > 0);
        r.total_tokens += t;
    }
    r.sequences = r.total_tokens.div_ceil(sequence_length);
    r.padding_tokens = r.sequences * sequence_length - r.total_tokens;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{epoch_report, presets, Category, SourceSpec, Weight};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn unit_docs(prefix: &str, n: usize, tokens: u64) -> Vec<Document> {
        (0..n)
            .map(|i| Document::new(format!("{prefix}-{i}"), prefix, "x").with_tokens(tokens))
            .collect()
    }

    fn w(s: &str) -> Weight {
        s.parse().unwrap()
    }

    #[test]
    fn single_source_one_epoch_is_a_permutation() {
        let sources = BTreeMap::from([("a".to_string(), unit_docs("a", 500, 3))]);
        let plan = StagePlan::new("p", 1500).with_weight("a", Weight::one());
        let draws: Vec<Draw> = Sampler::new(&sources, &plan, 7, SamplingMode::Deficit).unwrap().collect();
        assert_eq!(draws.len(), 500);
        let ids: HashSet<&str> = draws.iter().map(|d| d.doc.id.as_str()).collect();
        assert_eq!(ids.len(), 500);
        assert!(draws.iter().all(|d| d.epoch == 0));
        let in_order: Vec<&str> = sources["a"].iter().map(|d| d.id.as_str()).collect();
        let drawn: Vec<&str> = draws.iter().map(|d| d.doc.id.as_str()).collect();
        assert_ne!(drawn, in_order, "order is shuffled");
    }

    #[test]
    fn two_equal_sources_split_evenly() {
        let sources = BTreeMap::from([
            ("a".to_string(), unit_docs("a", 10_000, 1)),
            ("b".to_string(), unit_docs("b", 10_000, 1)),
        ]);
        let plan = StagePlan::new("p", 20_000).with_weight("a", w("0.5")).with_weight("b", w("0.5"));
        for mode in [SamplingMode::Deficit, SamplingMode::Proportional] {
            let mut s = Sampler::new(&sources, &plan, 1, mode).unwrap();
            let mut tally: BTreeMap<&str, u64> = BTreeMap::new();
            for d in s.by_ref() {
                *tally.entry(d.source).or_default() += d.doc.token_count;
            }
            let total: u64 = tally.values().sum();
            for v in tally.values() {
                assert!((*v as f64 / total as f64 - 0.5).abs() < 0.005);
            }
            assert_eq!(s.summary().emitted_tokens, total);
        }
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let sources = BTreeMap::from([
            ("a".to_string(), unit_docs("a", 300, 2)),
            ("b".to_string(), unit_docs("b", 100, 5)),
        ]);
        let plan = StagePlan::new("p", 4000).with_weight("a", w("0.7")).with_weight("b", w("0.3"));
        let run = |seed, mode| -> Vec<(String, u64)> {
            Sampler::new(&sources, &plan, seed, mode)
                .unwrap()
                .map(|d| (d.doc.id.clone(), d.epoch))
                .collect()
        };
        for mode in [SamplingMode::Deficit, SamplingMode::Proportional] {
            assert_eq!(run(3, mode), run(3, mode));
            assert_ne!(run(3, mode), run(4, mode));
        }
    }

    #[test]
    fn epochs_reshuffle_without_repeats() {
        let sources = BTreeMap::from([("a".to_string(), unit_docs("a", 50, 1))]);
        let plan = StagePlan::new("p", 170).with_weight("a", Weight::one());
        let draws: Vec<Draw> = Sampler::new(&sources, &plan, 9, SamplingMode::Deficit).unwrap().collect();
        assert_eq!(draws.len(), 170);
        let mut by_epoch: BTreeMap<u64, Vec<&str>> = BTreeMap::new();
        for d in &draws {
            by_epoch.entry(d.epoch).or_default().push(&d.doc.id);
        }
        assert_eq!(by_epoch.keys().copied().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        for (epoch, ids) in &by_epoch {
            let unique: HashSet<&&str> = ids.iter().collect();
            assert_eq!(unique.len(), ids.len(), "repeat within epoch {epoch}");
        }
        assert_ne!(by_epoch[&0], by_epoch[&1]);
        // Epoch counter advances exactly at exhaustion.
        assert!(draws[..50].iter().all(|d| d.epoch == 0));
        assert_eq!(draws[50].epoch, 1);
    }

    #[test]
    fn configuration_errors() {
        let sources = BTreeMap::from([("a".to_string(), unit_docs("a", 5, 1)), ("z".to_string(), unit_docs("z", 3, 0))]);
        let plan = StagePlan::new("p", 10).with_weight("a", w("0.5")).with_weight("b", w("0.5"));
        assert!(matches!(Sampler::new(&sources, &plan, 0, SamplingMode::Deficit), Err(Error::Config(_))));
        let plan = StagePlan::new("p", 10).with_weight("a", w("0.5")).with_weight("z", w("0.5"));
        assert!(Sampler::new(&sources, &plan, 0, SamplingMode::Deficit).is_err());
        let ok = StagePlan::new("p", 10).with_weight("a", Weight::one()).with_weight("b", Weight::zero());
        assert!(Sampler::new(&sources, &ok, 0, SamplingMode::Deficit).is_ok());
    }

    #[test]
    fn realized_epochs_agree_with_epoch_report() {
        let sizes = [("a", 400usize, 7u64), ("b", 90, 11), ("c", 30, 13)];
        let sources: BTreeMap<String, Vec<Document>> =
            sizes.iter().map(|&(n, c, t)| (n.to_string(), unit_docs(n, c, t))).collect();
        let specs: Vec<SourceSpec> = sizes
            .iter()
            .map(|&(n, c, t)| SourceSpec::new(n, c as u64 * t, Category::Other))
            .collect();
        let plan = StagePlan::new("p", 20_000)
            .with_weight("a", w("0.6"))
            .with_weight("b", w("0.3"))
            .with_weight("c", w("0.1"));
        let mut s = Sampler::new(&sources, &plan, 5, SamplingMode::Deficit).unwrap();
        s.by_ref().for_each(drop);
        let summary = s.summary();
        let report = epoch_report(&plan, &specs, 5.0);
        for &(name, count, tokens) in &sizes {
            let realized = summary.per_source[name].epochs;
            let planned = report.per_source[name].epochs;
            let one_doc = tokens as f64 / (count as u64 * tokens) as f64;
            assert!((realized - planned).abs() <= one_doc, "{name}: {realized} vs {planned}");
        }
        let state = s.state();
        assert_eq!(state.tokens_emitted["a"], summary.per_source["a"].emitted_tokens);
        assert!(state.per_source.values().all(|p| p.cursor <= 400));
    }

    #[test]
    fn context_extension_long_part_is_filtered() {
        let plan = presets::context_extension().with_budget(400_000);
        let mut sources: BTreeMap<String, Vec<Document>> = BTreeMap::new();
        for name in plan.weights.keys() {
            let docs = (0..40)
                .map(|i| Document::new(format!("{name}-{i}"), name.as_str(), "x").with_tokens(8000 + i * 10))
                .collect();
            sources.insert(name.clone(), docs);
        }
        let s = Sampler::new(&sources, &plan, 2, SamplingMode::Deficit).unwrap();
        let mut long_tokens = 0u64;
        let mut total = 0u64;
        for d in s {
            total += d.doc.token_count;
            if plan.min_doc_tokens.contains_key(d.source) {
                assert!(d.doc.token_count >= presets::LONG_CONTEXT_MIN_TOKENS);
                long_tokens += d.doc.token_count;
            }
        }
        assert!((long_tokens as f64 / total as f64 - 0.4).abs() < 0.05);
    }

    #[test]
    fn long_context_filter_boundary() {
        let docs = vec![
            Document::new("a", "s", "x").with_tokens(8192),
            Document::new("b", "s", "x").with_tokens(8191),
            Document::new("c", "s", "x").with_tokens(20_000),
        ];
        let kept: Vec<String> = long_context_filter(docs.clone(), DEFAULT_LONG_CONTEXT_TOKENS)
            .into_iter()
            .map(|d| d.id)
            .collect();
        let oracle: Vec<String> = docs.iter().filter(|d| d.token_count > 8191).map(|d| d.id.clone()).collect();
        assert_eq!(kept, oracle);
        assert_eq!(kept, vec!["a", "c"]);
    }

    #[test]
    fn packing_examples() {
        let r = pack_accounting([2048], 2048).unwrap();
        assert_eq!((r.sequences, r.padding_tokens, r.split_documents), (1, 0, 0));
        let r = pack_accounting([1000, 1000, 1000], 2048).unwrap();
        assert_eq!((r.sequences, r.split_documents, r.padding_tokens), (2, 1, 1096));
        let r = pack_accounting([], 2048).unwrap();
        assert_eq!(r.sequences, 0);
        let r = pack_accounting([5000], 2048).unwrap();
        assert_eq!((r.sequences, r.split_documents, r.boundary_crossings), (3, 1, 2));
        assert!(pack_accounting([1], 0).is_err());
    }

    #[test]
    fn split_plan_partitions_budget() {
        let plan = StagePlan::new("p", 10).with_weight("a", Weight::one());
        let parts = split_plan(&plan, 3, 1).unwrap();
        let budgets: Vec<u64> = parts.iter().map(|(p, _)| p.token_budget).collect();
        assert_eq!(budgets, vec![4, 3, 3]);
        assert_ne!(parts[0].1, parts[1].1);
    }

    proptest! {
        #[test]
        fn packing_matches_simulation(counts in proptest::collection::vec(0u64..300, 0..40), len in 1u64..200) {
            let r = pack_accounting(counts.iter().copied(), len).unwrap();
            // Token-by-token simulation.
            let mut pos = 0u64;
            let mut split = 0u64;
            for &c in &counts {
                let seqs: HashSet<u64> = (pos..pos + c).map(|p| p / len).collect();
                split += u64::from(seqs.len() > 1);
                pos += c;
            }
            prop_assert_eq!(r.split_documents, split);
            prop_assert_eq!(r.sequences * len, pos + r.padding_tokens);
            prop_assert!(r.padding_tokens < len);
        }

        #[test]
        fn shares_track_weights(n in 1i64..99, seed in any::<u64>()) {
            let sources = BTreeMap::from([
                ("a".to_string(), unit_docs("a", 2000, 1)),
                ("b".to_string(), unit_docs("b", 2000, 1)),
            ]);
            let plan = StagePlan::new("p", 100_000).with_weight("a", Weight::ratio(n, 100)).with_weight("b", Weight::ratio(100 - n, 100));
            let mut s = Sampler::new(&sources, &plan, seed, SamplingMode::Deficit).unwrap();
            s.by_ref().for_each(drop);
            let sum = s.summary();
            prop_assert!((sum.per_source["a"].share - n as f64 / 100.0).abs() < 0.005);
        }
    }
}
