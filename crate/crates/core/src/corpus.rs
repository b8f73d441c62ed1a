//! Documents, text normalization, word tokenization, shard IO and corpus statistics.
//!
//! Shards are newline-delimited JSON objects, one document per line. The keys
//! `id`, `source` and `text` are required; `url`, `domain`, `token_count`,
//! `quality_score` and `language` are optional. Any other key is carried in
//! [`Document::extra`] and written back unchanged.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use unicode_normalization::UnicodeNormalization;
use unicode_segmentation::UnicodeSegmentation;

use crate::error::{Error, Result};

pub const DEFAULT_CHARS_PER_TOKEN: f64 = 4.0;
pub const MAX_QUALITY_SCORE: f64 = 5.0;

/// One corpus record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Document {
    pub id: String,
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    pub text: String,
    pub token_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    /// Unknown keys, preserved on round-trip.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Document {
    /// A document with the token count estimated from its text.
    pub fn new(id: impl Into<String>, source: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let token_count = approx_tokens(&text, DEFAULT_CHARS_PER_TOKEN);
        Document {
            id: id.into(),
            source: source.into(),
            url: None,
            domain: None,
            text,
            token_count,
            quality_score: None,
            language: None,
            extra: Map::new(),
        }
    }

    pub fn with_tokens(mut self, token_count: u64) -> Self {
        self.token_count = token_count;
        self
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.quality_score = Some(score);
        self
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language = Some(language.into());
        self
    }

    pub fn with_url(mut self, url: impl Into<String>) -> Self {
        self.url = Some(url.into());
        self
    }

    /// Checks the record-level invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.text.is_empty() && self.token_count != 0 {
            return Err(format!("empty text with token_count {}", self.token_count));
        }
        if let Some(score) = self.quality_score {
            if !(0.0..=MAX_QUALITY_SCORE).contains(&score) {
                return Err(format!("quality_score {score} outside [0, 5]"));
            }
        }
        Ok(())
    }

    /// Integer score bucket, if the document carries a score.
    pub fn score_bucket(&self) -> Option<u8> {
        self.quality_score.map(score_bucket)
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    source: String,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    domain: Option<String>,
    text: String,
    #[serde(default)]
    token_count: Option<u64>,
    #[serde(default)]
    quality_score: Option<f64>,
    #[serde(default)]
    language: Option<String>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

impl From<RawRecord> for Document {
    fn from(raw: RawRecord) -> Self {
        let token_count = raw
            .token_count
            .unwrap_or_else(|| approx_tokens(&raw.text, DEFAULT_CHARS_PER_TOKEN));
        Document {
            id: raw.id,
            source: raw.source,
            url: raw.url,
            domain: raw.domain,
            text: raw.text,
            token_count,
            quality_score: raw.quality_score,
            language: raw.language,
            extra: raw.extra,
        }
    }
}

/// Round-half-up bucketing of a real score onto `0..=5`.
pub fn score_bucket(score: f64) -> u8 {
    (score + 0.5).floor().clamp(0.0, MAX_QUALITY_SCORE) as u8
}

/// NFC normalization, lowercasing, whitespace collapsed to single spaces and trimmed.
pub fn normalize_text(text: &str) -> String {
    // Lowercasing can emit decomposed sequences (e.g. U+0130), so recompose afterwards.
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.nfc().collect::<String>().split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Word tokens of the normalized text. Punctuation and symbols are discarded.
pub fn tokenize_words(text: &str) -> Vec<String> {
    normalize_text(text)
        .unicode_words()
        .map(str::to_owned)
        .collect()
}

/// `ceil(chars / chars_per_token)`.
pub fn approx_token_count(text: &str, chars_per_token: f64) -> Result<u64> {
    if !(chars_per_token.is_finite() && chars_per_token > 0.0) {
        return Err(Error::config(format!(
            "chars_per_token must be positive, got {chars_per_token}"
        )));
    }
    Ok(approx_tokens(text, chars_per_token))
}

fn approx_tokens(text: &str, chars_per_token: f64) -> u64 {
    let chars = text.chars().count() as f64;
    (chars / chars_per_token).ceil() as u64
}

/// What to do with a malformed shard line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Skip the line and report it.
    #[default]
    SkipAndReport,
    /// Stop at the first malformed line.
    Abort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ShardRead {
    pub documents: Vec<Document>,
    pub errors: Vec<RecordError>,
}

/// Parses one shard line. `line` is 1-based and only used for error reporting.
pub fn parse_record(text: &str, line: usize) -> Result<Document> {
    let raw: RawRecord = serde_json::from_str(text).map_err(|e| Error::Record {
        line,
        message: e.to_string(),
    })?;
    let doc = Document::from(raw);
    doc.validate()
        .map_err(|message| Error::Record { line, message })?;
    Ok(doc)
}

/// Reads a newline-delimited shard. Blank lines are ignored.
pub fn read_shard<R: BufRead>(reader: R, strictness: Strictness) -> Result<ShardRead> {
    let mut out = ShardRead::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line, line_no) {
            Ok(doc) => out.documents.push(doc),
            Err(Error::Record { line, message }) if strictness == Strictness::SkipAndReport => {
                out.errors.push(RecordError { line, message });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Serializes one document as a shard line, without the trailing newline.
pub fn record_line(doc: &Document) -> String {
    serde_json::to_string(doc).expect("documents always serialize")
}

pub fn write_shard<'a, W, I>(mut writer: W, documents: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Document>,
{
    for doc in documents {
        writer.write_all(record_line(doc).as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTally {
    pub documents: u64,
    pub tokens: u64,
}

/// Exact counts over a corpus. Mergeable: `merge` is associative and commutative,
/// so shards can be summarised independently and combined.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub document_count: u64,
    pub total_tokens: u64,
    pub per_source: BTreeMap<String, SourceTally>,
    pub score_histogram: BTreeMap<u8, u64>,
}

impl CorpusStats {
    pub fn add(&mut self, doc: &Document) {
        self.document_count += 1;
        self.total_tokens += doc.token_count;
        let tally = self.per_source.entry(doc.source.clone()).or_default();
        tally.documents += 1;
        tally.tokens += doc.token_count;
        if let Some(bucket) = doc.score_bucket() {
            *self.score_histogram.entry(bucket).or_default() += 1;
        }
    }

    pub fn merge(&mut self, other: &CorpusStats) {
        self.document_count += other.document_count;
        self.total_tokens += other.total_tokens;
        for (source, tally) in &other.per_source {
            let mine = self.per_source.entry(source.clone()).or_default();
            mine.documents += tally.documents;
            mine.tokens += tally.tokens;
        }
        for (bucket, count) in &other.score_histogram {
            *self.score_histogram.entry(*bucket).or_default() += count;
        }
    }

    pub fn scored_documents(&self) -> u64 {
        self.score_histogram.values().sum()
    }
}

pub fn corpus_stats<'a, I>(documents: I) -> CorpusStats
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut stats = CorpusStats::default();
    for doc in documents {
        stats.add(doc);
    }
    stats
}
