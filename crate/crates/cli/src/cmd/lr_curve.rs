use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use curate::lr::{self, CosineConfig, Schedule, WsdConfig};
use serde::Serialize;

use super::Ctx;
use crate::io;
use crate::Invalid;

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Wsd,
    Cosine,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LrCurveArgs {
    /// Schedule file (TOML), e.g. `kind = "wsd"` plus the config fields.
    #[arg(long, conflicts_with_all = ["preset", "schedule"])]
    pub config: Option<PathBuf>,
    /// Named preset: 1.7B, 360M, 135M or ablation.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_enum, default_value_t = Kind::Wsd)]
    pub schedule: Kind,
    #[arg(long, default_value_t = lr::WARMUP_STEPS)]
    pub warmup: u64,
    #[arg(long, default_value_t = 5.0e-4)]
    pub peak: f64,
    #[arg(long, default_value_t = 100_000)]
    pub total: u64,
    #[arg(long, default_value_t = 0.10)]
    pub decay_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    pub final_lr: f64,
    /// Emit every Nth step; the last step is always emitted.
    #[arg(long, default_value_t = 1)]
    pub every: u64,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Write rows here instead of stdout.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

fn resolve(args: &LrCurveArgs) -> Result<Schedule> {
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return toml::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())).into());
    }
    if let Some(name) = &args.preset {
        if name.eq_ignore_ascii_case("ablation") {
            return Ok(Schedule::Cosine(lr::ablation_cosine()));
        }
        return lr::model_preset(name)
            .map(|p| Schedule::Wsd(p.schedule))
            .ok_or_else(|| Invalid(format!("unknown preset {name:?}")).into());
    }
    Ok(match args.schedule {
        Kind::Wsd => Schedule::Wsd(WsdConfig {
            warmup_steps: args.warmup,
            peak_lr: args.peak,
            total_steps: args.total,
            decay_fraction: args.decay_fraction,
        }),
        Kind::Cosine => Schedule::Cosine(CosineConfig {
            warmup_steps: args.warmup,
            peak_lr: args.peak,
            total_steps: args.total,
            final_lr: args.final_lr,
        }),
    })
}

pub fn run(_ctx: &Ctx, args: &LrCurveArgs) -> Result<()> {
    if args.every == 0 {
        return Err(Invalid("--every must be at least 1".into()).into());
    }
    let schedule = resolve(args)?;
    schedule.validate()?;
    let d = args.delimiter;
    let mut out = format!("step{d}lr{d}phase\n");
    let total = schedule.total_steps();
    let mut step = 0;
    loop {
        let _ = writeln!(out, "{step}{d}{}{d}{}", schedule.lr(step)?, schedule.phase(step)?);
        if step == total {
            break;
        }
        step = (step + args.every).min(total);
    }
    io::emit_text(args.output.as_deref(), &out)
}
