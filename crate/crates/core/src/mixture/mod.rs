//! Multi-stage mixture plans: exact weights, validation, epoch accounting,
//! annealing-ablation plans and cumulative schedules.
//!
//! Weights are exact rationals. Floats appear only in reports.

mod config;
pub mod presets;
mod quantity;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{HorizonEntry, Plan, PlanConfig, SourceEntry, StageEntry};
pub use quantity::{format_tokens, parse_tokens, Weight};

pub const DEFAULT_EPOCH_CAP: f64 = 5.0;
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

pub const MATH_ANNEAL_BUDGET: u64 = 100_000_000_000;
pub const CODE_ANNEAL_BUDGET: u64 = 200_000_000_000;
pub const CODE_ANNEAL_LANGUAGES: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Web,
    Code,
    Math,
    Synthetic,
    Instruction,
    Other,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Web,
        Category::Code,
        Category::Math,
        Category::Synthetic,
        Category::Instruction,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Web => "web",
            Category::Code => "code",
            Category::Math => "math",
            Category::Synthetic => "synthetic",
            Category::Instruction => "instruction",
            Category::Other => "other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim().to_lowercase())
            .ok_or_else(|| Error::config(format!("unknown category {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub name: String,
    pub available_tokens: u64,
    pub category: Category,
}

impl SourceSpec {
    pub fn new(name: impl Into<String>, available_tokens: u64, category: Category) -> Self {
        SourceSpec {
            name: name.into(),
            available_tokens,
            category,
        }
    }
}

/// One training stage: a token budget and per-source sampling weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePlan {
    pub name: String,
    pub token_budget: u64,
    pub weights: BTreeMap<String, Weight>,
    /// Set when the weights are read off a chart rather than stated exactly.
    #[serde(default)]
    pub approximate: bool,
    /// Per-source minimum document length the sampler must enforce.
    #[serde(default)]
    pub min_doc_tokens: BTreeMap<String, u64>,
    #[serde(default)]
    pub note: Option<String>,
}

impl StagePlan {
    pub fn new(name: impl Into<String>, token_budget: u64) -> Self {
        StagePlan {
            name: name.into(),
            token_budget,
            weights: BTreeMap::new(),
            approximate: false,
            min_doc_tokens: BTreeMap::new(),
            note: None,
        }
    }

    /// Adds `weight` to `source`, accumulating if it is already present.
    pub fn with_weight(mut self, source: impl Into<String>, weight: Weight) -> Self {
        self.add_weight(source.into(), weight);
        self
    }

    fn add_weight(&mut self, source: String, weight: Weight) {
        let slot = self.weights.entry(source).or_insert_with(Weight::zero);
        *slot = &*slot + &weight;
    }

    pub fn with_budget(&self, token_budget: u64) -> Self {
        StagePlan {
            token_budget,
            ..self.clone()
        }
    }

    pub fn weight_sum(&self) -> Weight {
        self.weights.values().sum()
    }

    pub fn weight(&self, source: &str) -> Weight {
        self.weights.get(source).cloned().unwrap_or_else(Weight::zero)
    }

    /// Adds every weight of `other`, scaled by `factor`, into this plan.
    /// Length filters carry over.
    pub fn blend(mut self, factor: &Weight, other: &StagePlan) -> Self {
        for (source, w) in &other.weights {
            self.add_weight(source.clone(), factor * w);
        }
        for (source, &min) in &other.min_doc_tokens {
            self.min_doc_tokens.entry(source.clone()).or_insert(min);
        }
        self.approximate |= other.approximate;
        self
    }

    /// Exact token target for one source: `weight * budget`.
    pub fn tokens_for(&self, source: &str) -> BigRational {
        self.weight(source).of_tokens(self.token_budget)
    }
}

/// A validation finding. Collected rather than raised so callers see all of them.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    WeightSum { stage: String, sum: String },
    NegativeWeight { stage: String, source: String },
    UnknownSource { stage: String, source: String },
    ZeroBudget { stage: String },
    EmptyStage { stage: String },
    DuplicateSource { source: String },
    EmptySource { source: String },
    DuplicateStage { stage: String },
    UnknownStage { stage: String },
    BudgetOverflow { stage: String },
    NoStages,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::WeightSum { stage, sum } => write!(f, "stage {stage}: weights sum to {sum}, expected 1"),
            Diagnostic::NegativeWeight { stage, source } => write!(f, "stage {stage}: negative weight for {source}"),
            Diagnostic::UnknownSource { stage, source } => write!(f, "stage {stage}: unknown source {source}"),
            Diagnostic::ZeroBudget { stage } => write!(f, "stage {stage}: token budget must be positive"),
            Diagnostic::EmptyStage { stage } => write!(f, "stage {stage}: no weights"),
            Diagnostic::DuplicateSource { source } => write!(f, "source {source} declared more than once"),
            Diagnostic::EmptySource { source } => write!(f, "source {source}: available tokens must be positive"),
            Diagnostic::DuplicateStage { stage } => write!(f, "stage {stage} declared more than once"),
            Diagnostic::UnknownStage { stage } => write!(f, "unknown stage {stage}"),
            Diagnostic::BudgetOverflow { stage } => write!(f, "stage {stage}: cumulative budget overflows u64"),
            Diagnostic::NoStages => write!(f, "schedule has no stages"),
        }
    }
}

/// Checks source declarations: positive sizes and unique names.
pub fn validate_sources(sources: &[SourceSpec]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for s in sources {
        if !seen.insert(s.name.as_str()) {
            out.push(Diagnostic::DuplicateSource { source: s.name.clone() });
        }
        if s.available_tokens == 0 {
            out.push(Diagnostic::EmptySource { source: s.name.clone() });
        }
    }
    out
}

/// All problems with one stage: weight sum, negative weights, unknown sources
/// and an empty budget. An empty result means the stage is valid.
pub fn validate_stage(plan: &StagePlan, sources: &[SourceSpec]) -> Vec<Diagnostic> {
    let stage = || plan.name.clone();
    let known: BTreeSet<&str> = sources.iter().map(|s| s.name.as_str()).collect();
    let mut out = Vec::new();
    if plan.token_budget == 0 {
        out.push(Diagnostic::ZeroBudget { stage: stage() });
    }
    if plan.weights.is_empty() {
        out.push(Diagnostic::EmptyStage { stage: stage() });
    }
    for (source, w) in &plan.weights {
        if w.is_negative() {
            out.push(Diagnostic::NegativeWeight { stage: stage(), source: source.clone() });
        }
        if !known.contains(source.as_str()) {
            out.push(Diagnostic::UnknownSource { stage: stage(), source: source.clone() });
        }
    }
    let sum = plan.weight_sum();
    if !plan.weights.is_empty() && sum.distance(&Weight::one()) > WEIGHT_SUM_TOLERANCE {
        out.push(Diagnostic::WeightSum { stage: stage(), sum: sum.to_string() });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceEpochs {
    pub category: Category,
    pub weight: Weight,
    pub available_tokens: u64,
    pub tokens_drawn: f64,
    pub epochs: f64,
    #[serde(skip)]
    pub tokens_drawn_exact: BigRational,
    #[serde(skip)]
    pub epochs_exact: BigRational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapViolation {
    pub source: String,
    pub epochs: f64,
    pub cap: f64,
}

/// Per-source draws and epochs for a plan. Cap violations are warnings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochReport {
    pub label: String,
    pub token_budget: u64,
    pub cap: f64,
    pub per_source: BTreeMap<String, SourceEpochs>,
    pub violations: Vec<CapViolation>,
    pub diagnostics: Vec<Diagnostic>,
}

impl EpochReport {
    pub fn epochs(&self, source: &str) -> Option<f64> {
        self.per_source.get(source).map(|s| s.epochs)
    }
}

fn build_report<'a>(
    label: String,
    token_budget: u64,
    draws: impl IntoIterator<Item = (&'a str, &'a str, Weight, BigRational)>,
    sources: &[SourceSpec],
    cap: f64,
) -> EpochReport {
    let by_name: BTreeMap<&str, &SourceSpec> = sources.iter().map(|s| (s.name.as_str(), s)).collect();
    let mut report = EpochReport {
        label,
        token_budget,
        cap,
        per_source: BTreeMap::new(),
        violations: Vec::new(),
        diagnostics: Vec::new(),
    };
    for (stage, source, weight, tokens) in draws {
        let Some(spec) = by_name.get(source) else {
            report.diagnostics.push(Diagnostic::UnknownSource {
                stage: stage.to_owned(),
                source: source.to_owned(),
            });
            continue;
        };
        let entry = report.per_source.entry(source.to_owned()).or_insert_with(|| SourceEpochs {
            category: spec.category,
            weight: Weight::zero(),
            available_tokens: spec.available_tokens,
            tokens_drawn: 0.0,
            epochs: 0.0,
            tokens_drawn_exact: BigRational::zero(),
            epochs_exact: BigRational::zero(),
        });
        entry.weight = &entry.weight + &weight;
        entry.tokens_drawn_exact += tokens;
    }
    for (name, entry) in report.per_source.iter_mut() {
        entry.epochs_exact = if entry.available_tokens == 0 {
            BigRational::zero()
        } else {
            &entry.tokens_drawn_exact / BigRational::from_integer(entry.available_tokens.into())
        };
        entry.tokens_drawn = entry.tokens_drawn_exact.to_f64().unwrap_or(f64::INFINITY);
        entry.epochs = entry.epochs_exact.to_f64().unwrap_or(f64::INFINITY);
        if entry.epochs > cap {
            report.violations.push(CapViolation {
                source: name.clone(),
                epochs: entry.epochs,
                cap,
            });
        }
    }
    report
}

/// Tokens drawn and epochs per source for one stage.
pub fn epoch_report(plan: &StagePlan, sources: &[SourceSpec], cap: f64) -> EpochReport {
    let draws = plan
        .weights
        .iter()
        .map(|(s, w)| (plan.name.as_str(), s.as_str(), w.clone(), w.of_tokens(plan.token_budget)));
    build_report(plan.name.clone(), plan.token_budget, draws, sources, cap)
}

/// Epochs if this stage's weights were held for `horizon` tokens, e.g. the
/// first stage's code share over the whole training run.
pub fn horizon_report(plan: &StagePlan, sources: &[SourceSpec], horizon: u64, cap: f64) -> EpochReport {
    let mut report = epoch_report(&plan.with_budget(horizon), sources, cap);
    report.label = format!("{} over {}", plan.name, format_tokens(horizon));
    report
}

/// Cumulative epochs over every stage of a schedule. Weights in the result are
/// sums over stages and are only informative.
pub fn schedule_report(schedule: &TrainingSchedule, sources: &[SourceSpec], cap: f64) -> EpochReport {
    let draws = schedule.stages.iter().flat_map(|plan| {
        plan.weights
            .iter()
            .map(move |(s, w)| (plan.name.as_str(), s.as_str(), w.clone(), w.of_tokens(plan.token_budget)))
    });
    build_report("schedule".to_owned(), schedule.total_tokens(), draws, sources, cap)
}

/// Weight per category. Sources that are not declared are skipped.
pub fn category_weights(plan: &StagePlan, sources: &[SourceSpec]) -> BTreeMap<Category, Weight> {
    let by_name: BTreeMap<&str, Category> = sources.iter().map(|s| (s.name.as_str(), s.category)).collect();
    let mut out: BTreeMap<Category, Weight> = BTreeMap::new();
    for (source, w) in &plan.weights {
        if let Some(&c) = by_name.get(source.as_str()) {
            let slot = out.entry(c).or_insert_with(Weight::zero);
            *slot = &*slot + w;
        }
    }
    out
}

/// Ordered stages with cumulative token boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrainingSchedule {
    pub stages: Vec<StagePlan>,
    /// `boundaries[k]` is the token offset at which stage `k` ends.
    pub boundaries: Vec<u64>,
}

impl TrainingSchedule {
    pub fn total_tokens(&self) -> u64 {
        self.boundaries.last().copied().unwrap_or(0)
    }

    /// Index of the stage that covers token offset `token`.
    pub fn stage_at(&self, token: u64) -> Option<usize> {
        let i = self.boundaries.partition_point(|&b| b <= token);
        (i < self.stages.len()).then_some(i)
    }
}

/// Validates each stage and sums budgets into boundaries.
pub fn compose_schedule(
    stages: Vec<StagePlan>,
    sources: &[SourceSpec],
) -> std::result::Result<TrainingSchedule, Vec<Diagnostic>> {
    let mut diagnostics = validate_sources(sources);
    if stages.is_empty() {
        diagnostics.push(Diagnostic::NoStages);
    }
    let mut boundaries = Vec::with_capacity(stages.len());
    let mut total: Option<u64> = Some(0);
    for stage in &stages {
        diagnostics.extend(validate_stage(stage, sources));
        total = total.and_then(|t| t.checked_add(stage.token_budget));
        match total {
            Some(t) => boundaries.push(t),
            None => {
                diagnostics.push(Diagnostic::BudgetOverflow { stage: stage.name.clone() });
                break;
            }
        }
    }
    if diagnostics.is_empty() {
        Ok(TrainingSchedule { stages, boundaries })
    } else {
        Err(diagnostics)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnealKind {
    Math,
    Code,
}

impl FromStr for AnnealKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "math" => Ok(AnnealKind::Math),
            "code" => Ok(AnnealKind::Code),
            _ => Err(Error::config(format!("anneal kind must be math or code, got {s:?}"))),
        }
    }
}

/// Builds an annealing-ablation plan.
///
/// Math: one dataset under test at 0.6 of a 100B budget, the rest being
/// `base` scaled to 0.4. Code: exactly 15 per-language sources at 1/15 of a
/// 200B budget each; `base` is not used.
pub fn anneal_plan(under_test: &[SourceSpec], base: &StagePlan, kind: AnnealKind) -> Result<StagePlan> {
    match kind {
        AnnealKind::Math => {
            let [dataset] = under_test else {
                return Err(Error::config(format!(
                    "math anneal takes one dataset under test, got {}",
                    under_test.len()
                )));
            };
            if base.weights.is_empty() || base.weight_sum() != Weight::one() {
                return Err(Error::config(format!("base mixture {} must sum to exactly 1", base.name)));
            }
            let mut plan = StagePlan::new(format!("anneal-math-{}", dataset.name), MATH_ANNEAL_BUDGET)
                .with_weight(dataset.name.clone(), Weight::ratio(3, 5))
                .blend(&Weight::ratio(2, 5), base);
            plan.note = Some(format!("0.6 {} + 0.4 {}", dataset.name, base.name));
            Ok(plan)
        }
        AnnealKind::Code => {
            if under_test.len() != CODE_ANNEAL_LANGUAGES {
                return Err(Error::config(format!(
                    "code anneal needs {CODE_ANNEAL_LANGUAGES} per-language sources, got {}",
                    under_test.len()
                )));
            }
            let names: BTreeSet<&str> = under_test.iter().map(|s| s.name.as_str()).collect();
            if names.len() != under_test.len() {
                return Err(Error::config("code anneal sources must have distinct names"));
            }
            let share = Weight::ratio(1, CODE_ANNEAL_LANGUAGES as i64);
            let plan = under_test.iter().fold(StagePlan::new("anneal-code", CODE_ANNEAL_BUDGET), |p, s| {
                p.with_weight(s.name.clone(), share.clone())
            });
            Ok(plan)
        }
    }
}
