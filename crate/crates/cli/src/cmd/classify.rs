use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use curate::hashing::derive_seed;
use curate::quality::{train_classifier, ClassifierModel, TrainConfig};
use rayon::prelude::*;
use serde::Serialize;

use super::Ctx;
use crate::io::{self, read_inputs, InputArgs, Outputs, SkippedRecord};
use crate::Invalid;

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Labeled records: `quality_score` is the label, rounded to 0..=5.
    #[command(flatten)]
    pub input: InputArgs,
    /// Where to write the binary model. The report goes to `<model>.report.json`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub feature_bits: u32,
    /// N-gram orders to hash, e.g. `--ngram-orders 1 2`.
    #[arg(long, num_args = 1.., default_values_t = [1usize, 2])]
    pub ngram_orders: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,
    /// Bucket at or above which a prediction counts as positive for F1.
    #[arg(long, default_value_t = 3)]
    pub threshold: u8,
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    labeled_documents: usize,
    unlabeled_documents: usize,
    train_size: usize,
    holdout_size: usize,
    holdout_f1: Option<f64>,
    threshold: u8,
    label_histogram: BTreeMap<u8, usize>,
    config: &'a TrainConfig,
    skipped_records: &'a [SkippedRecord],
}

pub fn train(ctx: &Ctx, args: &TrainArgs) -> Result<()> {
    let loaded = read_inputs(&args.input)?;
    let mut labeled = Vec::with_capacity(loaded.documents.len());
    let mut unlabeled = 0;
    let mut histogram: BTreeMap<u8, usize> = BTreeMap::new();
    for doc in &loaded.documents {
        match doc.score_bucket() {
            Some(label) => {
                *histogram.entry(label).or_default() += 1;
                labeled.push((doc.text.as_str(), label));
            }
            None => unlabeled += 1,
        }
    }
    if labeled.is_empty() {
        return Err(Invalid("no labeled documents (quality_score missing everywhere)".into()).into());
    }
    let config = TrainConfig {
        feature_bits: args.feature_bits,
        ngram_orders: args.ngram_orders.clone(),
        seed: derive_seed(ctx.seed, "classifier"),
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        l2: args.l2,
        holdout_fraction: args.holdout,
        threshold: args.threshold,
    };
    let report = train_classifier(&labeled, &config)?;
    if let Some(parent) = args.model.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&args.model, report.model.to_bytes()).with_context(|| format!("writing {}", args.model.display()))?;
    let summary = TrainSummary {
        labeled_documents: labeled.len(),
        unlabeled_documents: unlabeled,
        train_size: report.train_size,
        holdout_size: report.holdout_size,
        holdout_f1: report.holdout_f1,
        threshold: report.threshold,
        label_histogram: histogram,
        config: &config,
        skipped_records: &loaded.skipped,
    };
    let report_path = io::sidecar(&args.model, "report.json");
    io::write_report(&report_path, "classify-train", &summary)?;
    io::write_manifest(
        &io::sidecar(&args.model, "manifest.json"),
        "classify-train",
        ctx.seed,
        args,
        &args.input.input,
        &[args.model.clone(), report_path],
    )
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, short = 'o')]
    pub output: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Serialize)]
struct ScoreSummary<'a> {
    scored_documents: usize,
    bucket_histogram: BTreeMap<u8, usize>,
    skipped_records: &'a [SkippedRecord],
}

/// Writes the raw score into `quality_score`; thresholds apply to its bucket.
pub fn score(ctx: &Ctx, args: &ScoreArgs) -> Result<()> {
    let file = File::open(&args.model).with_context(|| format!("opening {}", args.model.display()))?;
    let model = ClassifierModel::read_from(BufReader::new(file))?;
    let mut loaded = read_inputs(&args.input)?;
    let scores: Vec<f64> = loaded.documents.par_iter().map(|d| model.score(&d.text)).collect();
    let mut histogram: BTreeMap<u8, usize> = BTreeMap::new();
    for (doc, s) in loaded.documents.iter_mut().zip(scores) {
        doc.quality_score = Some(s);
        *histogram.entry(curate::corpus::score_bucket(s)).or_default() += 1;
    }
    let summary = ScoreSummary {
        scored_documents: loaded.documents.len(),
        bucket_histogram: histogram,
        skipped_records: &loaded.skipped,
    };
    let mut inputs = args.input.input.clone();
    inputs.push(args.model.clone());
    Outputs {
        command: "classify-score",
        seed: ctx.seed,
        parameters: args,
        inputs,
    }
    .finish(&args.output, Some(&loaded.documents), &summary)
}
