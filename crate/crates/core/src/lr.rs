//! Learning-rate schedules as pure functions of `(step, config)`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Warmup,
    Stable,
    Decay,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Warmup => "warmup",
            Phase::Stable => "stable",
            Phase::Decay => "decay",
        })
    }
}

/// Warmup-stable-decay: linear ramp, constant plateau, linear decay to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WsdConfig {
    pub warmup_steps: u64,
    pub peak_lr: f64,
    pub total_steps: u64,
    /// Share of `total_steps` spent decaying, in (0, 1).
    pub decay_fraction: f64,
}

impl WsdConfig {
    /// `round(decay_fraction * total_steps)`.
    pub fn decay_steps(&self) -> u64 {
        (self.decay_fraction * self.total_steps as f64).round() as u64
    }

    pub fn decay_start(&self) -> u64 {
        self.total_steps.saturating_sub(self.decay_steps())
    }

    pub fn validate(&self) -> Result<()> {
        if self.warmup_steps == 0 {
            return Err(Error::config("warmup_steps must be positive"));
        }
        if !(self.peak_lr.is_finite() && self.peak_lr > 0.0) {
            return Err(Error::config(format!("peak_lr must be positive, got {}", self.peak_lr)));
        }
        if self.total_steps == 0 {
            return Err(Error::config("total_steps must be positive"));
        }
        if !(self.decay_fraction > 0.0 && self.decay_fraction < 1.0) {
            return Err(Error::config(format!(
                "decay_fraction must be in (0, 1), got {}",
                self.decay_fraction
            )));
        }
        let decay = self.decay_steps();
        if decay == 0 {
            return Err(Error::config("decay_fraction rounds to zero decay steps"));
        }
        if self.warmup_steps + decay > self.total_steps {
            return Err(Error::config(format!(
                "warmup ({}) plus decay ({decay}) exceeds total_steps ({})",
                self.warmup_steps, self.total_steps
            )));
        }
        Ok(())
    }
}

fn check_step(step: u64, total: u64) -> Result<()> {
    if step > total {
        return Err(Error::input(format!("step {step} outside 0..={total}")));
    }
    Ok(())
}

/// Phase at `step`. A boundary step belongs to the later phase.
pub fn wsd_phase(step: u64, cfg: &WsdConfig) -> Result<Phase> {
    cfg.validate()?;
    check_step(step, cfg.total_steps)?;
    Ok(if step < cfg.warmup_steps {
        Phase::Warmup
    } else if step < cfg.decay_start() {
        Phase::Stable
    } else {
        Phase::Decay
    })
}

pub fn wsd_lr(step: u64, cfg: &WsdConfig) -> Result<f64> {
    Ok(match wsd_phase(step, cfg)? {
        Phase::Warmup => cfg.peak_lr * step as f64 / cfg.warmup_steps as f64,
        Phase::Stable => cfg.peak_lr,
        Phase::Decay => cfg.peak_lr * (cfg.total_steps - step) as f64 / cfg.decay_steps() as f64,
    })
}

/// Linear warmup, then a half cosine from `peak_lr` to `final_lr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineConfig {
    pub warmup_steps: u64,
    pub peak_lr: f64,
    pub total_steps: u64,
    #[serde(default)]
    pub final_lr: f64,
}

impl CosineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_lr.is_finite() && self.peak_lr > 0.0) {
            return Err(Error::config(format!("peak_lr must be positive, got {}", self.peak_lr)));
        }
        if !(self.final_lr >= 0.0 && self.final_lr <= self.peak_lr) {
            return Err(Error::config(format!("final_lr must be in [0, peak_lr], got {}", self.final_lr)));
        }
        if self.total_steps == 0 || self.warmup_steps >= self.total_steps {
            return Err(Error::config("total_steps must be positive and exceed warmup_steps"));
        }
        Ok(())
    }
}

pub fn cosine_lr(step: u64, cfg: &CosineConfig) -> Result<f64> {
    cfg.validate()?;
    check_step(step, cfg.total_steps)?;
    if step < cfg.warmup_steps {
        return Ok(cfg.peak_lr * step as f64 / cfg.warmup_steps as f64);
    }
    let progress = (step - cfg.warmup_steps) as f64 / (cfg.total_steps - cfg.warmup_steps) as f64;
    Ok(cfg.final_lr + (cfg.peak_lr - cfg.final_lr) * 0.5 * (1.0 + (PI * progress).cos()))
}

pub fn cosine_phase(step: u64, cfg: &CosineConfig) -> Result<Phase> {
    cfg.validate()?;
    check_step(step, cfg.total_steps)?;
    Ok(if step < cfg.warmup_steps { Phase::Warmup } else { Phase::Decay })
}

/// Either schedule behind one interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Schedule {
    Wsd(WsdConfig),
    Cosine(CosineConfig),
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Wsd(c) => c.validate(),
            Schedule::Cosine(c) => c.validate(),
        }
    }

    pub fn total_steps(&self) -> u64 {
        match self {
            Schedule::Wsd(c) => c.total_steps,
            Schedule::Cosine(c) => c.total_steps,
        }
    }

    pub fn lr(&self, step: u64) -> Result<f64> {
        match self {
            Schedule::Wsd(c) => wsd_lr(step, c),
            Schedule::Cosine(c) => cosine_lr(step, c),
        }
    }

    pub fn phase(&self, step: u64) -> Result<Phase> {
        match self {
            Schedule::Wsd(c) => wsd_phase(step, c),
            Schedule::Cosine(c) => cosine_phase(step, c),
        }
    }
}

/// Tokens per optimizer step assumed by the presets.
pub const TOKENS_PER_STEP: u64 = 2_000_000;
pub const WARMUP_STEPS: u64 = 2_000;

/// A model-size schedule preset with its optimizer metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelPreset {
    pub name: &'static str,
    pub training_tokens: u64,
    pub schedule: WsdConfig,
    /// AdamW `(beta1, beta2)`; recorded, not used.
    pub adam_betas: (f64, f64),
}

/// The 1.7B schedule (10% decay, peak 5e-4) and the 360M and 135M schedules
/// (20% decay, peak 3e-3). Step counts are training tokens over
/// [`TOKENS_PER_STEP`].
pub fn small_model_presets() -> Vec<ModelPreset> {
    let preset = |name, tokens: u64, peak_lr, decay_fraction| ModelPreset {
        name,
        training_tokens: tokens,
        schedule: WsdConfig {
            warmup_steps: WARMUP_STEPS,
            peak_lr,
            total_steps: tokens / TOKENS_PER_STEP,
            decay_fraction,
        },
        adam_betas: (0.9, 0.95),
    };
    const T: u64 = 1_000_000_000_000;
    vec![
        preset("1.7B", 11 * T, 5.0e-4, 0.10),
        preset("360M", 4 * T, 3.0e-3, 0.20),
        preset("135M", 2 * T, 3.0e-3, 0.20),
    ]
}

pub fn model_preset(name: &str) -> Option<ModelPreset> {
    small_model_presets().into_iter().find(|p| p.name.eq_ignore_ascii_case(name))
}

/// Data-ablation cosine schedule: peak 3e-4 over 350B tokens.
pub fn ablation_cosine() -> CosineConfig {
    CosineConfig {
        warmup_steps: WARMUP_STEPS,
        peak_lr: 3.0e-4,
        total_steps: 350_000_000_000 / TOKENS_PER_STEP,
        final_lr: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn main_cfg(total: u64) -> WsdConfig {
        WsdConfig {
            warmup_steps: 2000,
            peak_lr: 5.0e-4,
            total_steps: total,
            decay_fraction: 0.10,
        }
    }

    #[test]
    fn wsd_examples() {
        let cfg = main_cfg(100_000);
        assert_eq!(wsd_lr(0, &cfg).unwrap(), 0.0);
        assert_eq!(wsd_lr(2000, &cfg).unwrap(), 5.0e-4);
        assert_eq!(wsd_lr(100_000, &cfg).unwrap(), 0.0);
        assert_eq!(wsd_lr(100_000 - 5_000, &cfg).unwrap(), 2.5e-4);
        assert!(matches!(wsd_lr(100_001, &cfg), Err(Error::Input(_))));
    }

    #[test]
    fn phase_boundaries_go_to_later_phase() {
        let cfg = main_cfg(100_000);
        assert_eq!(wsd_phase(0, &cfg).unwrap(), Phase::Warmup);
        assert_eq!(wsd_phase(1999, &cfg).unwrap(), Phase::Warmup);
        assert_eq!(wsd_phase(2000, &cfg).unwrap(), Phase::Stable);
        assert_eq!(wsd_phase(89_999, &cfg).unwrap(), Phase::Stable);
        assert_eq!(wsd_phase(90_000, &cfg).unwrap(), Phase::Decay);
        assert_eq!(wsd_phase(100_000, &cfg).unwrap(), Phase::Decay);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = main_cfg(100_000);
        cfg.decay_fraction = 1.0;
        assert!(cfg.validate().is_err());
        let cfg = main_cfg(2100);
        assert!(cfg.validate().is_err(), "2000 warmup + 210 decay > 2100");
        let cfg = WsdConfig { warmup_steps: 1, peak_lr: 1.0, total_steps: 4, decay_fraction: 0.1 };
        assert!(cfg.validate().is_err(), "rounds to zero decay steps");
        assert!(WsdConfig { peak_lr: -1.0, ..main_cfg(100_000) }.validate().is_err());
    }

    #[test]
    fn cosine_examples() {
        let cfg = CosineConfig { warmup_steps: 100, peak_lr: 3.0e-4, total_steps: 1100, final_lr: 1.0e-5 };
        assert_eq!(cosine_lr(1100, &cfg).unwrap(), 1.0e-5);
        assert_eq!(cosine_lr(100, &cfg).unwrap(), 3.0e-4);
        let mid = cosine_lr(600, &cfg).unwrap();
        assert!((mid - (3.0e-4 + 1.0e-5) / 2.0).abs() < 1e-18);
        assert_eq!(ablation_cosine().peak_lr, 3.0e-4);
        assert!(ablation_cosine().validate().is_ok());
        assert!(CosineConfig { final_lr: 1.0, ..cfg }.validate().is_err());
    }

    #[test]
    fn presets() {
        let presets = small_model_presets();
        let big = &presets[0];
        assert_eq!(big.schedule.decay_fraction, 0.10);
        assert_eq!(big.schedule.peak_lr, 5.0e-4);
        assert_eq!(big.schedule.warmup_steps, 2000);
        for small in &presets[1..] {
            assert_eq!(small.schedule.decay_fraction, 0.20);
            assert_eq!(small.schedule.peak_lr, 3.0e-3);
        }
        assert!(presets.iter().all(|p| p.schedule.validate().is_ok()));
        assert_eq!(model_preset("360m").unwrap().schedule.total_steps, 2_000_000);
    }

    fn cfg_strategy() -> impl Strategy<Value = WsdConfig> {
        (1u64..500, 1u64..5000, 0.01f64..0.9).prop_filter_map("invariants", |(warmup, extra, frac)| {
            let cfg = WsdConfig { warmup_steps: warmup, peak_lr: 1e-3, total_steps: warmup + extra, decay_fraction: frac };
            cfg.validate().ok().map(|_| cfg)
        })
    }

    proptest! {
        #[test]
        fn bounded_continuous_and_monotone(cfg in cfg_strategy()) {
            let peak = cfg.peak_lr;
            let max_jump = peak / cfg.warmup_steps.min(cfg.decay_steps()) as f64;
            let mut prev = wsd_lr(0, &cfg).unwrap();
            let mut prev_phase = Phase::Warmup;
            prop_assert_eq!(prev, 0.0);
            for s in 1..=cfg.total_steps {
                let lr = wsd_lr(s, &cfg).unwrap();
                let phase = wsd_phase(s, &cfg).unwrap();
                prop_assert!((0.0..=peak).contains(&lr));
                prop_assert!((lr - prev).abs() <= max_jump * (1.0 + 1e-12));
                if phase == prev_phase {
                    match phase {
                        Phase::Warmup => prop_assert!(lr >= prev),
                        Phase::Stable => prop_assert_eq!(lr, prev),
                        Phase::Decay => prop_assert!(lr <= prev),
                    }
                }
                prev = lr;
                prev_phase = phase;
            }
            prop_assert_eq!(prev, 0.0);
        }

        #[test]
        fn extending_training_keeps_the_stable_region(cfg in cfg_strategy(), more in 1u64..10_000) {
            let longer = WsdConfig { total_steps: cfg.total_steps + more, ..cfg };
            prop_assume!(longer.validate().is_ok());
            let shared = cfg.decay_start().min(longer.decay_start());
            for s in 0..shared {
                prop_assert_eq!(wsd_lr(s, &cfg).unwrap(), wsd_lr(s, &longer).unwrap());
            }
        }
    }
}
