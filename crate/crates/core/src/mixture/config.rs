use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::quantity::TokenRepr;
use super::{
    compose_schedule, validate_sources, validate_stage, Category, Diagnostic, SourceSpec, StagePlan, TrainingSchedule,
    Weight, DEFAULT_EPOCH_CAP,
};
use crate::error::{Error, Result};

/// Plan file layout (TOML):
///
/// ```toml
/// cap = 5.0
/// schedule = ["stage1", "stage2"]
///
/// [[source]]
/// name = "fineweb-edu"
/// tokens = "1.3T"
/// category = "web"
/// paths = ["shards/fineweb-edu.jsonl"]
///
/// [[stage]]
/// name = "stage1"
/// budget = "6T"
/// weights = { fineweb-edu = "0.54", dclm = "0.36", starcoderdata = "0.10" }
///
/// [[horizon]]
/// stage = "stage1"
/// tokens = "11T"
/// ```
#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<String>>,
    #[serde(default, rename = "source")]
    pub sources: Vec<SourceEntry>,
    #[serde(default, rename = "stage")]
    pub stages: Vec<StageEntry>,
    #[serde(default, rename = "horizon", skip_serializing_if = "Vec::is_empty")]
    pub horizons: Vec<HorizonEntry>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub name: String,
    tokens: TokenRepr,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StageEntry {
    pub name: String,
    budget: TokenRepr,
    pub weights: BTreeMap<String, Weight>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub approximate: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub min_doc_tokens: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonEntry {
    pub stage: String,
    tokens: TokenRepr,
}

/// A resolved plan: sources, stages, schedule order and horizon checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub sources: Vec<SourceSpec>,
    /// Shard files per source, relative paths resolved by the caller.
    pub paths: BTreeMap<String, Vec<PathBuf>>,
    pub stages: Vec<StagePlan>,
    pub schedule: Vec<String>,
    pub horizons: Vec<(String, u64)>,
    pub cap: f64,
}

impl Plan {
    pub fn from_toml_str(text: &str) -> Result<Plan> {
        let config: PlanConfig = toml::from_str(text).map_err(|e| Error::config(format!("plan file: {e}")))?;
        Plan::from_config(config)
    }

    pub fn from_config(config: PlanConfig) -> Result<Plan> {
        let cap = config.cap.unwrap_or(DEFAULT_EPOCH_CAP);
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::config(format!("epoch cap must be positive, got {cap}")));
        }
        let mut sources = Vec::with_capacity(config.sources.len());
        let mut paths = BTreeMap::new();
        for s in config.sources {
            let tokens = s.tokens.resolve()?;
            if !s.paths.is_empty() {
                paths.insert(s.name.clone(), s.paths);
            }
            sources.push(SourceSpec::new(s.name, tokens, s.category));
        }
        let mut stages = Vec::with_capacity(config.stages.len());
        for s in config.stages {
            stages.push(StagePlan {
                token_budget: s.budget.resolve()?,
                name: s.name,
                weights: s.weights,
                approximate: s.approximate,
                min_doc_tokens: s.min_doc_tokens,
                note: s.note,
            });
        }
        let schedule = config
            .schedule
            .unwrap_or_else(|| stages.iter().map(|s| s.name.clone()).collect());
        let horizons = config
            .horizons
            .into_iter()
            .map(|h| Ok((h.stage, h.tokens.resolve()?)))
            .collect::<Result<_>>()?;
        Ok(Plan {
            sources,
            paths,
            stages,
            schedule,
            horizons,
            cap,
        })
    }

    pub fn to_config(&self) -> PlanConfig {
        PlanConfig {
            cap: Some(self.cap),
            schedule: Some(self.schedule.clone()),
            sources: self
                .sources
                .iter()
                .map(|s| SourceEntry {
                    name: s.name.clone(),
                    tokens: TokenRepr::Int(s.available_tokens),
                    category: s.category,
                    paths: self.paths.get(&s.name).cloned().unwrap_or_default(),
                })
                .collect(),
            stages: self
                .stages
                .iter()
                .map(|s| StageEntry {
                    name: s.name.clone(),
                    budget: TokenRepr::Int(s.token_budget),
                    weights: s.weights.clone(),
                    approximate: s.approximate,
                    min_doc_tokens: s.min_doc_tokens.clone(),
                    note: s.note.clone(),
                })
                .collect(),
            horizons: self
                .horizons
                .iter()
                .map(|(stage, t)| HorizonEntry {
                    stage: stage.clone(),
                    tokens: TokenRepr::Int(*t),
                })
                .collect(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_config()).expect("plan serializes")
    }

    pub fn stage(&self, name: &str) -> Option<&StagePlan> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn source(&self, name: &str) -> Option<&SourceSpec> {
        self.sources.iter().find(|s| s.name == name)
    }

    /// Every diagnostic across sources, stages, schedule and horizons.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = validate_sources(&self.sources);
        let mut names = BTreeSet::new();
        for stage in &self.stages {
            if !names.insert(stage.name.as_str()) {
                out.push(Diagnostic::DuplicateStage { stage: stage.name.clone() });
            }
            out.extend(validate_stage(stage, &self.sources));
        }
        for name in self.schedule.iter().chain(self.horizons.iter().map(|(s, _)| s)) {
            if !names.contains(name.as_str()) {
                out.push(Diagnostic::UnknownStage { stage: name.clone() });
            }
        }
        out.dedup();
        out
    }

    /// The scheduled stages composed into cumulative boundaries.
    pub fn training_schedule(&self) -> std::result::Result<TrainingSchedule, Vec<Diagnostic>> {
        let mut missing = Vec::new();
        let mut stages = Vec::with_capacity(self.schedule.len());
        for name in &self.schedule {
            match self.stage(name) {
                Some(s) => stages.push(s.clone()),
                None => missing.push(Diagnostic::UnknownStage { stage: name.clone() }),
            }
        }
        if !missing.is_empty() {
            return Err(missing);
        }
        compose_schedule(stages, &self.sources)
    }
}
