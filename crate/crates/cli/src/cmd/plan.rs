use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use curate::mixture::{
    epoch_report, format_tokens, horizon_report, presets, schedule_report, Diagnostic, EpochReport, Plan,
    TrainingSchedule,
};
use serde::Serialize;

use super::Ctx;
use crate::io;
use crate::Invalid;

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlanArgs {
    /// Plan file (TOML) with `[[source]]`, `[[stage]]` and `[[horizon]]` tables.
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    pub config: Option<PathBuf>,
    /// Use the built-in presets.
    #[arg(long)]
    pub builtin: bool,
    /// Epoch cap; overrides the plan file.
    #[arg(long)]
    pub cap: Option<f64>,
    /// Treat cap violations as validation failures.
    #[arg(long)]
    pub fatal_cap: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Print the resolved plan as TOML and exit.
    #[arg(long)]
    pub dump: bool,
    /// Also write the JSON report (and a manifest) here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct PlanReport<'a> {
    cap: f64,
    diagnostics: &'a [Diagnostic],
    schedule: Option<&'a TrainingSchedule>,
    stages: Vec<EpochReport>,
    horizons: Vec<EpochReport>,
    cumulative: Option<EpochReport>,
    cap_violations: usize,
}

pub fn load_plan(config: Option<&PathBuf>) -> Result<Plan> {
    match config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut plan = Plan::from_toml_str(&text)?;
            let base = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
            for paths in plan.paths.values_mut() {
                for p in paths.iter_mut() {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
            }
            Ok(plan)
        }
        None => Ok(presets::builtin_plan()),
    }
}

pub fn run(ctx: &Ctx, args: &PlanArgs) -> Result<()> {
    let mut plan = load_plan(args.config.as_ref())?;
    if let Some(cap) = args.cap {
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Invalid(format!("--cap must be positive, got {cap}")).into());
        }
        plan.cap = cap;
    }
    if args.dump {
        return io::emit_text(None, &plan.to_toml_string());
    }

    let diagnostics = plan.validate();
    let schedule = plan.training_schedule().ok();
    let stages: Vec<EpochReport> = plan.stages.iter().map(|s| epoch_report(s, &plan.sources, plan.cap)).collect();
    let horizons: Vec<EpochReport> = plan
        .horizons
        .iter()
        .filter_map(|(name, tokens)| plan.stage(name).map(|s| horizon_report(s, &plan.sources, *tokens, plan.cap)))
        .collect();
    let cumulative = schedule.as_ref().map(|s| schedule_report(s, &plan.sources, plan.cap));
    let cap_violations = stages
        .iter()
        .chain(&horizons)
        .chain(&cumulative)
        .map(|r| r.violations.len())
        .sum();
    let report = PlanReport {
        cap: plan.cap,
        diagnostics: &diagnostics,
        schedule: schedule.as_ref(),
        stages,
        horizons,
        cumulative,
        cap_violations,
    };

    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Table => render(&report),
    };
    io::emit_text(None, &text)?;
    if let Some(path) = &args.report {
        io::write_report(path, "plan", &report)?;
        let inputs: Vec<PathBuf> = args.config.iter().cloned().collect();
        io::write_manifest(&io::sidecar(path, "manifest.json"), "plan", ctx.seed, args, &inputs, &[path.clone()])?;
    }

    if !diagnostics.is_empty() {
        return Err(Invalid(format!("plan has {} validation error(s)", diagnostics.len())).into());
    }
    if args.fatal_cap && cap_violations > 0 {
        return Err(Invalid(format!("{cap_violations} source(s) exceed the epoch cap")).into());
    }
    Ok(())
}

fn render_epochs(out: &mut String, r: &EpochReport) {
    let _ = writeln!(out, "\n{} ({} tokens)", r.label, format_tokens(r.token_budget));
    let _ = writeln!(out, "  {:<30} {:>10} {:>10} {:>10} {:>8}", "source", "weight", "drawn", "available", "epochs");
    for (name, e) in &r.per_source {
        let flag = if e.epochs > r.cap { "  > cap" } else { "" };
        let _ = writeln!(
            out,
            "  {:<30} {:>10} {:>10} {:>10} {:>8.3}{flag}",
            name,
            e.weight.to_string(),
            format_tokens(e.tokens_drawn.round() as u64),
            format_tokens(e.available_tokens),
            e.epochs
        );
    }
}

fn render(r: &PlanReport) -> String {
    let mut out = String::new();
    if let Some(s) = r.schedule {
        let _ = writeln!(out, "schedule");
        let mut start = 0;
        for (stage, end) in s.stages.iter().zip(&s.boundaries) {
            let approx = if stage.approximate { "  (approximate)" } else { "" };
            let _ = writeln!(
                out,
                "  {:<20} {:>8} .. {:<8}{approx}",
                stage.name,
                format_tokens(start),
                format_tokens(*end)
            );
            start = *end;
        }
    }
    for e in r.stages.iter().chain(&r.horizons).chain(&r.cumulative) {
        render_epochs(&mut out, e);
    }
    let _ = writeln!(out, "\nepoch cap {}: {} violation(s)", r.cap, r.cap_violations);
    for e in r.stages.iter().chain(&r.horizons).chain(&r.cumulative) {
        for v in &e.violations {
            let _ = writeln!(out, "  warning: {}: {} at {:.3} epochs", e.label, v.source, v.epochs);
        }
    }
    if !r.diagnostics.is_empty() {
        let _ = writeln!(out, "\nvalidation errors");
        for d in r.diagnostics {
            let _ = writeln!(out, "  {d}");
        }
    }
    out
}
