use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser};
use serde::{Deserialize, Serialize};

use super::{dispatch, Command, Ctx};
use crate::io;
use crate::{Cli, Invalid};

pub const PIPELINE_VERSION: u32 = 1;

/// Commands that read a shard and write one. `stats` writes a report and
/// passes the shard through unchanged.
const STEP_COMMANDS: [&str; 5] = ["filter", "dedup", "decontam", "classify-score", "stats"];
/// Parameters holding paths, resolved against the config file's directory.
const PATH_PARAMS: [&str; 2] = ["benchmarks", "model"];

#[derive(Debug, Clone, Args, Serialize)]
pub struct PipelineArgs {
    /// Pipeline file (TOML).
    #[arg(long)]
    pub config: PathBuf,
}

/// Pipeline file layout:
///
/// ```toml
/// version = 1
/// master_seed = 7
/// inputs = ["corpus.jsonl"]
/// output_dir = "out"
///
/// [[steps]]
/// command = "filter"
/// params = { min_score = 3 }
/// ```
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub master_seed: u64,
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub steps: Vec<Step>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub command: String,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Serialize)]
struct StepRecord {
    command: String,
    argv: Vec<String>,
    output: String,
}

/// Turns `{min_score = 3, strict = true}` into `--min-score 3 --strict`.
fn params_to_argv(params: &toml::Table, base: &Path) -> Result<Vec<String>> {
    let mut argv = Vec::new();
    for (key, value) in params {
        if key == "input" || key == "output" {
            return Err(Invalid(format!("parameter {key:?} is set by the pipeline")).into());
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &toml::Value| -> Result<String> {
            let text = match v {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                other => return Err(Invalid(format!("unsupported value for {key:?}: {other}")).into()),
            };
            Ok(if PATH_PARAMS.contains(&key.as_str()) {
                base.join(text).display().to_string()
            } else {
                text
            })
        };
        match value {
            toml::Value::Boolean(true) => argv.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                argv.push(flag);
                for item in items {
                    argv.push(scalar(item)?);
                }
            }
            other => {
                argv.push(flag);
                argv.push(scalar(other)?);
            }
        }
    }
    Ok(argv)
}

pub fn run(_ctx: &Ctx, args: &PipelineArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let config: PipelineConfig =
        toml::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", args.config.display())))?;
    if config.version != PIPELINE_VERSION {
        return Err(Invalid(format!("unsupported pipeline version {}", config.version)).into());
    }
    if config.steps.is_empty() || config.inputs.is_empty() {
        return Err(Invalid("pipeline needs inputs and at least one step".into()).into());
    }
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let output_dir = base.join(&config.output_dir);
    fs::create_dir_all(&output_dir).with_context(|| format!("creating {}", output_dir.display()))?;

    let inputs: Vec<PathBuf> = config.inputs.iter().map(|p| base.join(p)).collect();
    let mut current = inputs.clone();
    let mut records = Vec::new();
    let mut produced = Vec::new();
    for (i, step) in config.steps.iter().enumerate() {
        if !STEP_COMMANDS.contains(&step.command.as_str()) {
            return Err(Invalid(format!(
                "step {i}: {:?} cannot run in a pipeline (allowed: {})",
                step.command,
                STEP_COMMANDS.join(", ")
            ))
            .into());
        }
        let is_stats = step.command == "stats";
        let output = output_dir.join(format!("{i:02}-{}.{}", step.command, if is_stats { "json" } else { "jsonl" }));
        let mut argv = vec![
            "curate".to_owned(),
            "--seed".to_owned(),
            config.master_seed.to_string(),
            step.command.clone(),
        ];
        argv.push("--input".to_owned());
        argv.extend(current.iter().map(|p| p.display().to_string()));
        argv.push(if is_stats { "--report" } else { "--output" }.to_owned());
        argv.push(output.display().to_string());
        argv.extend(params_to_argv(&step.params, &base)?);

        let cli = Cli::try_parse_from(&argv).map_err(|e| Invalid(format!("step {i} ({}): {e}", step.command)))?;
        if matches!(cli.command, Command::Pipeline(_)) {
            return Err(Invalid("pipelines cannot nest".into()).into());
        }
        dispatch(&Ctx { seed: cli.seed }, cli.command).with_context(|| format!("step {i} ({})", step.command))?;
        produced.push(output.clone());
        if !is_stats {
            produced.push(io::sidecar(&output, "report.json"));
        }
        produced.push(io::sidecar(&output, "manifest.json"));
        if !is_stats {
            current = vec![output.clone()];
        }
        records.push(StepRecord {
            command: step.command.clone(),
            argv: argv[1..].to_vec(),
            output: output.display().to_string(),
        });
    }

    #[derive(Serialize)]
    struct PipelineReport<'a> {
        master_seed: u64,
        steps: &'a [StepRecord],
        final_output: Vec<String>,
    }
    let report = PipelineReport {
        master_seed: config.master_seed,
        steps: &records,
        final_output: current.iter().map(|p| p.display().to_string()).collect(),
    };
    let report_path = output_dir.join("pipeline.report.json");
    io::write_report(&report_path, "pipeline", &report)?;
    let mut manifest_inputs = vec![args.config.clone()];
    manifest_inputs.extend(inputs);
    produced.push(report_path);
    io::write_manifest(
        &output_dir.join("pipeline.manifest.json"),
        "pipeline",
        config.master_seed,
        args,
        &manifest_inputs,
        &produced,
    )
}
