use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use curate::corpus::record_line;
use curate::hashing::derive_seed;
use curate::mixture::parse_tokens;
use curate::sampler::{pack_accounting, SampleSummary, Sampler, SamplingMode};
use curate::Document;
use serde::Serialize;
use serde_json::json;

use super::plan::load_plan;
use super::Ctx;
use crate::io::{self, read_inputs, InputArgs, SkippedRecord};
use crate::Invalid;

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    /// One `{seq, source, epoch, id, token_count}` line per draw.
    Ids,
    /// The full record with a `sample` provenance object added.
    Full,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Deficit,
    Proportional,
}

fn parse_source(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or_else(|| format!("expected name=path, got {s:?}"))?;
    Ok((name.trim().to_owned(), PathBuf::from(path.trim())))
}

fn parse_token_arg(s: &str) -> std::result::Result<u64, String> {
    parse_tokens(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    /// Plan file; source shard paths come from its `paths` entries.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    pub plan: Option<PathBuf>,
    /// Use the built-in stages (supply shards with `--source`).
    #[arg(long)]
    pub builtin: bool,
    #[arg(long)]
    pub stage: String,
    /// `name=path` shard for a source; repeatable, adds to the plan's paths.
    #[arg(long = "source", value_parser = parse_source)]
    pub sources: Vec<(String, PathBuf)>,
    #[arg(long, value_enum, default_value_t = Emit::Ids)]
    pub emit: Emit,
    /// Cap the stage budget, e.g. `10M`. Weights are kept.
    #[arg(long, value_parser = parse_token_arg)]
    pub limit_tokens: Option<u64>,
    #[arg(long, value_enum, default_value_t = Mode::Deficit)]
    pub mode: Mode,
    /// Sequence length for the packing tallies in the report.
    #[arg(long, default_value_t = 2048)]
    pub seq_len: u64,
    #[arg(long, short = 'o')]
    pub output: PathBuf,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Serialize)]
struct SampleReport<'a> {
    #[serde(flatten)]
    summary: &'a SampleSummary,
    packing: curate::sampler::PackReport,
    skipped_records: &'a [SkippedRecord],
}

pub fn run(ctx: &Ctx, args: &SampleArgs) -> Result<()> {
    let plan = load_plan(args.plan.as_ref())?;
    let mut stage = plan
        .stage(&args.stage)
        .cloned()
        .ok_or_else(|| Invalid(format!("unknown stage {:?}", args.stage)))?;
    if let Some(limit) = args.limit_tokens {
        stage.token_budget = stage.token_budget.min(limit);
    }
    let diagnostics = curate::mixture::validate_stage(&stage, &plan.sources);
    if !diagnostics.is_empty() {
        let lines: Vec<String> = diagnostics.iter().map(|d| d.to_string()).collect();
        return Err(Invalid(lines.join("; ")).into());
    }

    let mut paths = plan.paths.clone();
    for (name, path) in &args.sources {
        paths.entry(name.clone()).or_default().push(path.clone());
    }
    let mut sources: BTreeMap<String, Vec<Document>> = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut inputs = Vec::new();
    for name in stage.weights.keys() {
        let Some(files) = paths.get(name) else { continue };
        let loaded = read_inputs(&InputArgs {
            input: files.clone(),
            strict: args.strict,
        })?;
        inputs.extend(files.iter().cloned());
        skipped.extend(loaded.skipped);
        sources.insert(name.clone(), loaded.documents);
    }

    let mode = match args.mode {
        Mode::Deficit => SamplingMode::Deficit,
        Mode::Proportional => SamplingMode::Proportional,
    };
    let mut sampler = Sampler::new(&sources, &stage, derive_seed(ctx.seed, "sample"), mode)?;
    io::create_parent(&args.output)?;
    let file = File::create(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
    let mut out = BufWriter::new(file);
    let mut lengths = Vec::new();
    for draw in sampler.by_ref() {
        lengths.push(draw.doc.token_count);
        let line = match args.emit {
            Emit::Ids => json!({
                "seq": draw.seq,
                "source": draw.source,
                "epoch": draw.epoch,
                "id": draw.doc.id,
                "token_count": draw.doc.token_count,
            })
            .to_string(),
            Emit::Full => {
                let mut doc = draw.doc.clone();
                doc.extra.insert(
                    "sample".into(),
                    json!({"seq": draw.seq, "source": draw.source, "epoch": draw.epoch}),
                );
                record_line(&doc)
            }
        };
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    drop(out);

    let summary = sampler.summary();
    let report = SampleReport {
        summary: &summary,
        packing: pack_accounting(lengths, args.seq_len)?,
        skipped_records: &skipped,
    };
    let report_path = io::sidecar(&args.output, "report.json");
    io::write_report(&report_path, "sample", &report)?;
    inputs.extend(args.plan.iter().cloned());
    io::write_manifest(
        &io::sidecar(&args.output, "manifest.json"),
        "sample",
        ctx.seed,
        args,
        &inputs,
        &[args.output.clone(), report_path],
    )
}
