//! Built-in sources, stage mixtures and the four-stage schedule.
//!
//! Source sizes are published token counts except where a source's doc line
//! says "placeholder": those sizes are not published and only exist so the
//! presets validate. Override them in a plan file before trusting the epochs.

use super::{Category, Plan, SourceSpec, StagePlan, TrainingSchedule, Weight};

const B: u64 = 1_000_000_000;
const T: u64 = 1_000 * B;

pub const FINEWEB_EDU: &str = "fineweb-edu";
pub const DCLM: &str = "dclm";
pub const STARCODERDATA: &str = "starcoderdata";
pub const STACK_EDU: &str = "stack-edu";
pub const OWM: &str = "owm";
pub const INFIMM_WEBMATH: &str = "infimm-webmath";
pub const FINEMATH_4PLUS: &str = "finemath-4plus";
pub const FINEMATH_3PLUS: &str = "finemath-3plus";
pub const INFIWEBMATH_4PLUS: &str = "infiwebmath-4plus";
pub const INFIWEBMATH_3PLUS: &str = "infiwebmath-3plus";
pub const AUGGSM8K: &str = "auggsm8k";
pub const COSMOPEDIA_V2: &str = "cosmopedia-v2";
pub const DCLM_LONG: &str = "dclm-long";
pub const FINEWEB_EDU_LONG: &str = "fineweb-edu-long";
pub const DOLMA_BOOKS: &str = "dolma-books";
pub const SFT_GENERAL: &str = "sft-general";
pub const SFT_MATH: &str = "sft-math";

/// Minimum length of a long-context document.
pub const LONG_CONTEXT_MIN_TOKENS: u64 = 8192;
/// Tokens trained with the context-extension mixture.
pub const CONTEXT_EXTENSION_BUDGET: u64 = 75 * B;
/// Horizon over which the first stage's code share is sized.
pub const FULL_RUN_TOKENS: u64 = 11 * T;

/// Instruction-tuning composition in samples.
pub const SMOLTALK_COUNTS: [(&str, u64); 13] = [
    ("magpie-ultra", 431_000),
    ("smol-rewrite", 56_200),
    ("smol-constraints", 36_200),
    ("smol-summarization", 101_000),
    ("numinamath-cot", 112_000),
    ("metamathqa", 50_000),
    ("self-oss-starcoder2-instruct", 50_700),
    ("apigen-function-calling", 87_500),
    ("systemchats2", 35_900),
    ("longalign", 3_730),
    ("everyday-conversations", 2_380),
    ("explore-instruct-rewriting", 32_000),
    ("openhermes2.5", 100_000),
];

fn w(s: &str) -> Weight {
    s.parse().expect("preset weight literal")
}

/// Every source referenced by a built-in stage.
pub fn builtin_sources() -> Vec<SourceSpec> {
    use Category::*;
    let mut out = vec![
        SourceSpec::new(FINEWEB_EDU, 1_300 * B, Web),
        SourceSpec::new(DCLM, 3_800 * B, Web),
        SourceSpec::new(STARCODERDATA, 250 * B, Code),
        SourceSpec::new(STACK_EDU, 125 * B, Code),
        SourceSpec::new(OWM, 12 * B, Math),
        SourceSpec::new(INFIMM_WEBMATH, 40 * B, Math),
        SourceSpec::new(FINEMATH_4PLUS, 10 * B, Math),
        SourceSpec::new(FINEMATH_3PLUS, 34 * B, Math),
        SourceSpec::new(INFIWEBMATH_4PLUS, 8_500_000_000, Math),
        SourceSpec::new(INFIWEBMATH_3PLUS, 20_500_000_000, Math),
        // placeholder
        SourceSpec::new(AUGGSM8K, B / 10, Math),
        SourceSpec::new(COSMOPEDIA_V2, 30 * B, Synthetic),
        // placeholder
        SourceSpec::new(DCLM_LONG, 50 * B, Web),
        // placeholder
        SourceSpec::new(FINEWEB_EDU_LONG, 50 * B, Web),
        // placeholder
        SourceSpec::new(DOLMA_BOOKS, 5 * B, Other),
    ];
    out.extend(SMOLTALK_COUNTS.iter().map(|&(n, c)| SourceSpec::new(n, c, Category::Instruction)));
    out.push(SourceSpec::new(SFT_GENERAL, smoltalk_general_samples(), Category::Instruction));
    // placeholder: one math instruction set's worth of samples
    out.push(SourceSpec::new(SFT_MATH, 112_000, Category::Instruction));
    out
}

fn smoltalk_general_samples() -> u64 {
    SMOLTALK_COUNTS[..4].iter().map(|(_, c)| c).sum()
}

/// Web 0.90 at 60/40 FineWeb-Edu/DCLM, code 0.10.
pub fn stage1() -> StagePlan {
    StagePlan::new("stage1", 6 * T)
        .with_weight(FINEWEB_EDU, w("0.54"))
        .with_weight(DCLM, w("0.36"))
        .with_weight(STARCODERDATA, w("0.10"))
}

/// Web 0.75 at 60/40, code 0.20, math 0.05.
pub fn stage2() -> StagePlan {
    StagePlan::new("stage2", 2 * T)
        .with_weight(FINEWEB_EDU, w("0.45"))
        .with_weight(DCLM, w("0.30"))
        .with_weight(STARCODERDATA, w("0.20"))
        .with_weight(OWM, w("0.05"))
}

/// Web 0.70 at 40/60, code 0.20, math 0.10. Only the web ratio and the math
/// total are stated exactly; the web/code residual and the math split are
/// approximate.
pub fn stage3() -> StagePlan {
    let mut plan = StagePlan::new("stage3", 2 * T)
        .with_weight(FINEWEB_EDU, w("0.28"))
        .with_weight(DCLM, w("0.42"))
        .with_weight(STACK_EDU, w("0.20"))
        .with_weight(INFIMM_WEBMATH, w("0.08"))
        .with_weight(OWM, w("0.02"));
    plan.approximate = true;
    plan.note = Some(
        "web/code residual approximate; stack-edu share includes the StarCoder2 fallbacks and Jupyter notebooks".into(),
    );
    plan
}

/// Web 0.58 (40/60), code 0.24, math 0.14, synthetic 0.04. The math total
/// includes OWM at 0.0008 and AugGSM8K at 0.0002; the split of the remaining
/// 0.139 between FineMath4+ and InfiWebMath3+ is approximate.
pub fn stage4() -> StagePlan {
    let mut plan = StagePlan::new("stage4", T)
        .with_weight(FINEWEB_EDU, w("0.232"))
        .with_weight(DCLM, w("0.348"))
        .with_weight(STACK_EDU, w("0.24"))
        .with_weight(FINEMATH_4PLUS, w("0.07"))
        .with_weight(INFIWEBMATH_3PLUS, w("0.069"))
        .with_weight(OWM, w("0.0008"))
        .with_weight(AUGGSM8K, w("0.0002"))
        .with_weight(COSMOPEDIA_V2, w("0.04"));
    plan.approximate = true;
    plan.note = Some("category totals exact; split within math approximate".into());
    plan
}

/// 0.40 long documents (DCLM 0.10, FineWeb-Edu 0.10, books 0.20) plus 0.60 of
/// the stage-4 mixture.
pub fn context_extension() -> StagePlan {
    let mut plan = StagePlan::new("context_extension", CONTEXT_EXTENSION_BUDGET)
        .with_weight(DCLM_LONG, w("0.10"))
        .with_weight(FINEWEB_EDU_LONG, w("0.10"))
        .with_weight(DOLMA_BOOKS, w("0.20"))
        .blend(&w("0.6"), &stage4());
    for source in [DCLM_LONG, FINEWEB_EDU_LONG, DOLMA_BOOKS] {
        plan.min_doc_tokens.insert(source.to_owned(), LONG_CONTEXT_MIN_TOKENS);
    }
    plan
}

/// Instruction mixture with weights proportional to sample counts. Budget and
/// sizes are in samples, so every source comes out at one epoch.
pub fn smoltalk() -> StagePlan {
    let total: u64 = SMOLTALK_COUNTS.iter().map(|(_, c)| c).sum();
    let mut plan = SMOLTALK_COUNTS.iter().fold(StagePlan::new("smoltalk", total), |p, &(n, c)| {
        p.with_weight(n, Weight::ratio(c as i64, total as i64))
    });
    plan.note = Some("units are samples".into());
    plan
}

/// 0.80 general instruction data, 0.20 math. Budget in samples, sized so
/// the general part is one pass.
pub fn sft_math_ablation() -> StagePlan {
    let general = smoltalk_general_samples();
    let mut plan = StagePlan::new("sft_math_ablation", general * 5 / 4)
        .with_weight(SFT_GENERAL, w("0.8"))
        .with_weight(SFT_MATH, w("0.2"));
    plan.note = Some("units are samples".into());
    plan
}

pub fn builtin_stages() -> Vec<StagePlan> {
    vec![
        stage1(),
        stage2(),
        stage3(),
        stage4(),
        context_extension(),
        smoltalk(),
        sft_math_ablation(),
    ]
}

pub fn builtin_stage(name: &str) -> Option<StagePlan> {
    builtin_stages().into_iter().find(|s| s.name == name)
}

/// Stages 1 to 4 in order, ending at 6T, 8T, 10T and 11T.
pub fn pretraining_schedule() -> TrainingSchedule {
    super::compose_schedule(vec![stage1(), stage2(), stage3(), stage4()], &builtin_sources())
        .expect("built-in schedule is valid")
}

/// The built-in presets as a plan: the four-stage schedule plus a check of
/// stage 1 over the full run.
pub fn builtin_plan() -> Plan {
    Plan {
        sources: builtin_sources(),
        paths: Default::default(),
        stages: builtin_stages(),
        schedule: ["stage1", "stage2", "stage3", "stage4"].map(String::from).to_vec(),
        horizons: vec![("stage1".to_owned(), FULL_RUN_TOKENS)],
        cap: super::DEFAULT_EPOCH_CAP,
    }
}
