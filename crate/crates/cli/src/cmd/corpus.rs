use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use curate::corpus::{corpus_stats, CorpusStats};
use curate::decontam::{self, BenchmarkIndex, DecontamConfig, RatioDenominator};
use curate::hashing::derive_seed;
use curate::minhash::{self, DedupConfig};
use curate::quality::{ThresholdPlan, ThresholdReport};
use serde::Serialize;

use super::Ctx;
use crate::io::{self, read_inputs, InputArgs, Outputs, SkippedRecord};

#[derive(Debug, Clone, Args, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Write the report here (plus a manifest) instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct StatsReport<'a> {
    #[serde(flatten)]
    stats: &'a CorpusStats,
    skipped_records: &'a [SkippedRecord],
}

pub fn stats(ctx: &Ctx, args: &StatsArgs) -> Result<()> {
    let loaded = read_inputs(&args.input)?;
    let stats = corpus_stats(&loaded.documents);
    let report = StatsReport {
        stats: &stats,
        skipped_records: &loaded.skipped,
    };
    match &args.report {
        Some(path) => {
            io::write_report(path, "stats", &report)?;
            io::write_manifest(
                &io::sidecar(path, "manifest.json"),
                "stats",
                ctx.seed,
                args,
                &args.input.input,
                &[path.clone()],
            )
        }
        None => {
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            io::emit_text(None, &text)
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DedupArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, short = 'o')]
    pub output: PathBuf,
    /// Words per shingle.
    #[arg(long, default_value_t = minhash::DEFAULT_SHINGLE_WIDTH)]
    pub shingle_width: usize,
    /// Signature length.
    #[arg(long, default_value_t = minhash::DEFAULT_NUM_HASHES)]
    pub num_hashes: usize,
    /// LSH bands; 1 means the whole signature must match.
    #[arg(long, default_value_t = 1)]
    pub bands: usize,
}

#[derive(Serialize)]
struct DedupSummary<'a> {
    input_documents: usize,
    kept_documents: usize,
    dropped_documents: usize,
    cluster_count: usize,
    sentinel_count: usize,
    /// dropped id -> kept representative
    dropped: &'a BTreeMap<String, String>,
    skipped_records: &'a [SkippedRecord],
}

pub fn dedup(ctx: &Ctx, args: &DedupArgs) -> Result<()> {
    let loaded = read_inputs(&args.input)?;
    let input_documents = loaded.documents.len();
    let config = DedupConfig {
        shingle_width: args.shingle_width,
        num_hashes: args.num_hashes,
        bands: args.bands,
        master_seed: derive_seed(ctx.seed, "dedup"),
    };
    let (kept, report) = minhash::dedup(loaded.documents, &config)?;
    let summary = DedupSummary {
        input_documents,
        kept_documents: kept.len(),
        dropped_documents: report.dropped.len(),
        cluster_count: report.cluster_count,
        sentinel_count: report.sentinel_count,
        dropped: &report.dropped,
        skipped_records: &loaded.skipped,
    };
    Outputs {
        command: "dedup",
        seed: ctx.seed,
        parameters: args,
        inputs: args.input.input.clone(),
    }
    .finish(&args.output, Some(&kept), &summary)
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    Benchmark,
    MinLength,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DecontamArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, short = 'o')]
    pub output: PathBuf,
    /// Benchmark items as NDJSON records; `source` names the suite.
    #[arg(long, required = true, num_args = 1..)]
    pub benchmarks: Vec<PathBuf>,
    #[arg(long, default_value_t = decontam::DEFAULT_NGRAM)]
    pub ngram: usize,
    #[arg(long, default_value_t = decontam::DEFAULT_MIN_RATIO)]
    pub min_ratio: f64,
    #[arg(long, value_enum, default_value_t = Denominator::Benchmark)]
    pub denominator: Denominator,
    /// Scan documents longer than this in windows.
    #[arg(long, default_value_t = decontam::DEFAULT_WINDOW_GUARD)]
    pub window_guard: usize,
    #[arg(long, default_value_t = decontam::DEFAULT_MAX_CANDIDATES)]
    pub max_candidates: usize,
}

#[derive(Serialize)]
struct Flag<'a> {
    doc: &'a str,
    bench: &'a str,
    ratio: f64,
}

#[derive(Serialize)]
struct DecontamSummary<'a> {
    input_documents: usize,
    clean_documents: usize,
    flagged_documents: usize,
    benchmark_items: usize,
    min_ratio: f64,
    flagged: Vec<Flag<'a>>,
    truncated: &'a BTreeMap<String, usize>,
    skipped_records: &'a [SkippedRecord],
}

pub fn decontam(ctx: &Ctx, args: &DecontamArgs) -> Result<()> {
    let bench = read_inputs(&InputArgs {
        input: args.benchmarks.clone(),
        strict: true,
    })?;
    let index = BenchmarkIndex::from_documents(&bench.documents, args.ngram)?;
    let loaded = read_inputs(&args.input)?;
    let input_documents = loaded.documents.len();
    let config = DecontamConfig {
        min_ratio: args.min_ratio,
        window_guard: args.window_guard,
        max_candidates: args.max_candidates,
        denominator: match args.denominator {
            Denominator::Benchmark => RatioDenominator::Benchmark,
            Denominator::MinLength => RatioDenominator::MinLength,
        },
    };
    let (clean, report) = decontam::decontaminate(loaded.documents, &index, &config)?;
    let flagged = report
        .flagged
        .iter()
        .flat_map(|(doc, overlaps)| {
            overlaps.iter().map(move |o| Flag {
                doc,
                bench: &o.bench_id,
                ratio: o.ratio,
            })
        })
        .collect();
    let summary = DecontamSummary {
        input_documents,
        clean_documents: clean.len(),
        flagged_documents: report.flagged_count(),
        benchmark_items: index.items().len(),
        min_ratio: args.min_ratio,
        flagged,
        truncated: &report.truncated,
        skipped_records: &loaded.skipped,
    };
    let mut inputs = args.input.input.clone();
    inputs.extend(args.benchmarks.iter().cloned());
    Outputs {
        command: "decontam",
        seed: ctx.seed,
        parameters: args,
        inputs,
    }
    .finish(&args.output, Some(&clean), &summary)
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdPreset {
    /// 3 by default, 2 for Java, 3 for Markdown.
    EducationalCode,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FilterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, short = 'o')]
    pub output: PathBuf,
    /// Minimum score bucket (scores round half up to 0..=5).
    #[arg(long, default_value_t = 3)]
    pub min_score: u8,
    /// Start from a preset instead of a uniform threshold.
    #[arg(long, value_enum)]
    pub preset: Option<ThresholdPreset>,
    /// Per-language overrides such as `java=2,markdown=3`.
    #[arg(long)]
    pub lang: Option<String>,
}

#[derive(Serialize)]
struct FilterSummary<'a> {
    input_documents: usize,
    thresholds: &'a ThresholdPlan,
    #[serde(flatten)]
    counts: &'a ThresholdReport,
    skipped_records: &'a [SkippedRecord],
}

pub fn filter(ctx: &Ctx, args: &FilterArgs) -> Result<()> {
    let mut plan = match args.preset {
        Some(ThresholdPreset::EducationalCode) => ThresholdPlan::educational_code(),
        None => ThresholdPlan::uniform(args.min_score),
    };
    if let Some(spec) = &args.lang {
        plan = plan.parse_overrides(spec)?;
    }
    plan.validate()?;
    let loaded = read_inputs(&args.input)?;
    let input_documents = loaded.documents.len();
    let (kept, counts) = plan.apply(loaded.documents)?;
    let summary = FilterSummary {
        input_documents,
        thresholds: &plan,
        counts: &counts,
        skipped_records: &loaded.skipped,
    };
    Outputs {
        command: "filter",
        seed: ctx.seed,
        parameters: args,
        inputs: args.input.input.clone(),
    }
    .finish(&args.output, Some(&kept), &summary)
}
