//! Shard IO, JSON reports and run manifests.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use curate::corpus::{read_shard, write_shard, RecordError, Strictness};
use curate::Document;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const REPORT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// NDJSON shards, read in the order given.
    #[arg(long = "input", short = 'i', required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Abort on the first malformed record instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SkippedRecord {
    pub path: String,
    pub line: usize,
    pub message: String,
}

pub struct Loaded {
    pub documents: Vec<Document>,
    pub skipped: Vec<SkippedRecord>,
}

pub fn read_inputs(args: &InputArgs) -> Result<Loaded> {
    let strictness = if args.strict { Strictness::Abort } else { Strictness::SkipAndReport };
    let mut loaded = Loaded {
        documents: Vec::new(),
        skipped: Vec::new(),
    };
    for path in &args.input {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let shard = read_shard(BufReader::new(file), strictness).with_context(|| format!("reading {}", path.display()))?;
        loaded.documents.extend(shard.documents);
        loaded
            .skipped
            .extend(shard.errors.into_iter().map(|RecordError { line, message }| SkippedRecord {
                path: path.display().to_string(),
                line,
                message,
            }));
    }
    Ok(loaded)
}

pub fn write_documents(path: &Path, documents: &[Document]) -> Result<()> {
    create_parent(path)?;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_shard(BufWriter::new(file), documents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

/// `<path>.<suffix>`, e.g. `out.jsonl.report.json`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    schema: String,
    version: u32,
    command: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_report<T: Serialize>(path: &Path, command: &str, body: &T) -> Result<()> {
    let envelope = Envelope {
        schema: format!("curate.{command}.report"),
        version: REPORT_VERSION,
        command,
        body,
    };
    write_json(path, &envelope)
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

/// Records what a run consumed and produced. Contains no timestamps so that
/// repeated runs produce identical manifests.
#[derive(Serialize)]
pub struct Manifest<'a, P: Serialize> {
    schema: &'static str,
    version: u32,
    tool: &'static str,
    tool_version: &'static str,
    command: &'a str,
    seed: u64,
    parameters: &'a P,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

pub fn write_manifest<P: Serialize>(
    path: &Path,
    command: &str,
    seed: u64,
    parameters: &P,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> Result<()> {
    let manifest = Manifest {
        schema: "curate.manifest",
        version: REPORT_VERSION,
        tool: "curate",
        tool_version: TOOL_VERSION,
        command,
        seed,
        parameters,
        inputs: inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
        outputs: outputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
    };
    write_json(path, &manifest)
}

/// Writes the shard, its report and its manifest. The manifest lists
/// `inputs` and the files written here.
pub struct Outputs<'a, P: Serialize> {
    pub command: &'a str,
    pub seed: u64,
    pub parameters: &'a P,
    pub inputs: Vec<PathBuf>,
}

impl<P: Serialize> Outputs<'_, P> {
    pub fn finish<R: Serialize>(self, output: &Path, documents: Option<&[Document]>, report: &R) -> Result<()> {
        let mut produced = Vec::new();
        if let Some(docs) = documents {
            write_documents(output, docs)?;
            produced.push(output.to_path_buf());
        }
        let report_path = sidecar(output, "report.json");
        write_report(&report_path, self.command, report)?;
        produced.push(report_path);
        write_manifest(
            &sidecar(output, "manifest.json"),
            self.command,
            self.seed,
            self.parameters,
            &self.inputs,
            &produced,
        )
    }
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            create_parent(p)?;
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
            Ok(())
        }
    }
}
