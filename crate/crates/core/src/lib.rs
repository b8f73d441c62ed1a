//! Corpus curation and pretraining-mixture planning.
//!
//! The crate is organised by pipeline role:
//!
//! - [`corpus`]: documents, text normalization, word tokenization, shard IO and statistics.
//! - [`minhash`]: single-band MinHash LSH near-duplicate removal.
//! - [`decontam`]: benchmark decontamination by n-gram candidate lookup plus an LCS overlap test.
//! - [`quality`]: score thresholds, domain aggregation / URL expansion and a hashed linear classifier.
//! - [`mixture`]: exact-rational stage mixtures, epoch budgeting, annealing plans and presets.
//! - [`lr`]: warmup-stable-decay and cosine learning-rate schedules.
//! - [`sampler`]: deterministic multi-source sampling and sequence-packing accounting.
//!
//! Every randomized step takes an explicit seed; nothing reads ambient entropy.

pub mod corpus;
pub mod decontam;
mod error;
pub mod hashing;
pub mod lr;
pub mod minhash;
pub mod mixture;
pub mod quality;
pub mod sampler;

pub use corpus::{CorpusStats, Document};
pub use error::{Error, Result};
