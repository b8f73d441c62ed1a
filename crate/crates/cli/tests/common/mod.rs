//! Fixtures shared by the CLI integration tests and the acceptance harness.

#![allow(dead_code)]

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use curate::corpus::write_shard;
use curate::Document;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn curate_bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_curate"))
}

/// Runs the binary and returns its output without checking the status.
pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(curate_bin())
        .args(args)
        .env_remove("CURATE_SEED")
        .output()
        .expect("spawn curate")
}

/// Runs the binary and panics with its stderr on failure.
pub fn run_ok<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = run(args);
    assert!(
        out.status.success(),
        "curate failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn write_docs(path: &Path, docs: &[Document]) {
    let file = File::create(path).expect("create shard");
    write_shard(BufWriter::new(file), docs).expect("write shard");
}

pub fn read_docs(path: &Path) -> Vec<Document> {
    let file = File::open(path).expect("open shard");
    curate::corpus::read_shard(std::io::BufReader::new(file), curate::corpus::Strictness::Abort)
        .expect("read shard")
        .documents
}

pub fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).expect("json")
}

/// `len` words drawn from `vocab` words spelled `<prefix><n>`.
pub fn words(rng: &mut ChaCha8Rng, prefix: &str, vocab: u32, len: usize) -> Vec<String> {
    (0..len).map(|_| format!("{prefix}{}", rng.gen_range(0..vocab))).collect()
}

/// A mixed corpus for the filter -> dedup -> decontam pipeline.
///
/// Returns the corpus and the benchmark shard. Roughly one document in
/// twenty repeats an earlier one, and one in two hundred embeds a benchmark
/// item. Scores are spread over `0..=5`.
pub fn pipeline_corpus(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Document>, Vec<Document>) {
    let bench_items = 100;
    let benchmarks: Vec<Document> = (0..bench_items)
        .map(|i| Document::new(format!("q{i}"), "suite", words(rng, "b", 5000, 30).join(" ")))
        .collect();
    let mut docs: Vec<Document> = Vec::with_capacity(n);
    for i in 0..n {
        let score = rng.gen_range(0..=50) as f64 / 10.0;
        let roll = rng.gen_range(0..200);
        let text = if roll < 10 && !docs.is_empty() {
            let j = rng.gen_range(0..docs.len());
            docs[j].text.to_uppercase()
        } else if roll == 10 {
            let item = &benchmarks[rng.gen_range(0..bench_items)];
            format!(
                "{} {} {}",
                words(rng, "w", 50_000, 20).join(" "),
                item.text,
                words(rng, "w", 50_000, 20).join(" ")
            )
        } else {
            let len = rng.gen_range(40..160);
            words(rng, "w", 50_000, len).join(" ")
        };
        let source = if i % 3 == 0 { "web" } else { "code" };
        docs.push(Document::new(format!("d{i:06}"), source, text).with_score(score));
    }
    (docs, benchmarks)
}

/// Documents for a named source whose token counts sum to about `tokens`.
pub fn source_docs(rng: &mut ChaCha8Rng, source: &str, tokens: u64, count: usize) -> Vec<Document> {
    let mean = (tokens / count as u64).max(2);
    (0..count)
        .map(|i| {
            let t = rng.gen_range(mean / 2..=mean + mean / 2);
            Document::new(format!("{source}-{i}"), source, words(rng, "s", 1000, 8).join(" ")).with_tokens(t)
        })
        .collect()
}
