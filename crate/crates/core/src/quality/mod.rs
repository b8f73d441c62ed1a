//! Quality filtering: integer score thresholds, domain aggregation and URL
//! expansion, and a trainable hashed n-gram classifier.

mod classifier;
mod domain;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

pub use classifier::{classify, train_classifier, ClassifierModel, TrainConfig, TrainReport};
pub use domain::{
    DEFAULT_MIN_PAGES, DEFAULT_MIN_PAGE_SCORE, DEFAULT_MIN_SEED_URLS, domain_select, expand_urls, registrable_domain, ExpansionResult, ScoredPage};

/// Keeps scores 4-5 (the "4+" subsets).
pub const FOUR_PLUS: u8 = 4;
/// Keeps scores 3-5.
pub const THREE_PLUS: u8 = 3;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub kept: usize,
    pub below_threshold: usize,
    /// Documents without a `quality_score`; always dropped.
    pub unscored: usize,
}

/// Minimum score bucket per language, with a default for everything else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdPlan {
    pub default: u8,
    /// Keys are lowercase language tags.
    pub per_language: BTreeMap<String, u8>,
}

impl ThresholdPlan {
    pub fn uniform(min_score: u8) -> Self {
        ThresholdPlan {
            default: min_score,
            per_language: BTreeMap::new(),
        }
    }

    /// Educational-code thresholds: 3 everywhere, 2 for Java, 3 for Markdown.
    pub fn educational_code() -> Self {
        ThresholdPlan {
            default: 3,
            per_language: BTreeMap::from([("java".to_string(), 2), ("markdown".to_string(), 3)]),
        }
    }

    pub fn with_language(mut self, language: &str, min_score: u8) -> Self {
        self.per_language.insert(language.to_lowercase(), min_score);
        self
    }

    /// Parses `lang=score` pairs separated by commas, e.g. `java=2,markdown=3`.
    /// A `default=N` entry overrides the default.
    pub fn parse_overrides(mut self, spec: &str) -> Result<Self> {
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (lang, score) = part
                .split_once('=')
                .ok_or_else(|| Error::config(format!("expected lang=score, got {part:?}")))?;
            let score: u8 = score
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("invalid score in {part:?}")))?;
            let lang = lang.trim().to_lowercase();
            if lang == "default" {
                self.default = score;
            } else {
                self.per_language.insert(lang, score);
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (lang, &s) in std::iter::once((&"default".to_string(), &self.default)).chain(&self.per_language) {
            if s > 5 {
                return Err(Error::config(format!("threshold for {lang} must be in 0..=5, got {s}")));
            }
        }
        Ok(())
    }

    pub fn threshold_for(&self, doc: &Document) -> u8 {
        doc.language
            .as_deref()
            .and_then(|l| self.per_language.get(&l.to_lowercase()))
            .copied()
            .unwrap_or(self.default)
    }

    /// Keeps documents whose score bucket reaches their language's threshold.
    pub fn apply(&self, documents: Vec<Document>) -> Result<(Vec<Document>, ThresholdReport)> {
        self.validate()?;
        let mut report = ThresholdReport::default();
        let kept: Vec<Document> = documents
            .into_iter()
            .filter(|doc| match doc.score_bucket() {
                None => {
                    report.unscored += 1;
                    false
                }
                Some(bucket) if bucket >= self.threshold_for(doc) => true,
                Some(_) => {
                    report.below_threshold += 1;
                    false
                }
            })
            .collect();
        report.kept = kept.len();
        Ok((kept, report))
    }
}

/// Keeps exactly the scored documents whose bucket is `>= min_score`.
pub fn threshold_filter(documents: Vec<Document>, min_score: u8) -> Result<(Vec<Document>, ThresholdReport)> {
    ThresholdPlan::uniform(min_score).apply(documents)
}
