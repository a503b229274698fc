use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Result, ShineError};
use crate::interaction::InteractionConfig;
use crate::numerics::AdamConfig;
use crate::tasks::Task;

/// Components switched off for an ablation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub no_interaction: bool,
    pub no_frequency: bool,
    pub no_constituency: bool,
    pub no_all: bool,
}

/// Named ablation variants in table order.
pub const VARIANTS: [&str; 5] = ["full", "no_interaction", "no_frequency", "no_constituency", "no_all"];

impl Ablation {
    pub fn variant(name: &str) -> Result<Ablation> {
        let mut a = Ablation::default();
        match name {
            "full" => {}
            "no_interaction" => a.no_interaction = true,
            "no_frequency" => a.no_frequency = true,
            "no_constituency" => a.no_constituency = true,
            "no_all" => a.no_all = true,
            other => {
                return Err(ShineError::Config(format!(
                    "unknown ablation {other:?}; expected one of {}",
                    VARIANTS.join(", ")
                )))
            }
        }
        Ok(a.resolved())
    }

    /// Applies the implications: `no_all` turns everything off, and dropping
    /// constituency features also drops the frequency matrix.
    pub fn resolved(self) -> Ablation {
        let all = self.no_all;
        let no_constituency = all || self.no_constituency;
        Ablation {
            no_interaction: all || self.no_interaction,
            no_frequency: no_constituency || self.no_frequency,
            no_constituency,
            no_all: all,
        }
    }

    pub fn name(&self) -> &'static str {
        let r = self.resolved();
        if r.no_all || (r.no_interaction && r.no_constituency) {
            "no_all"
        } else if r.no_constituency {
            "no_constituency"
        } else if r.no_interaction {
            "no_interaction"
        } else if r.no_frequency {
            "no_frequency"
        } else {
            "full"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without dev improvement before stopping; 0 never stops early.
    pub patience: usize,
    /// Linear warmup length in optimizer steps; 0 disables warmup.
    pub warmup_steps: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub max_grad_norm: f64,
    /// Probability of replacing a training token with `<unk>`.
    pub word_dropout: f64,
    pub min_count: usize,
    /// Evaluate on dev every this many epochs (and always after the last).
    pub eval_every: usize,
    /// Select the checkpoint on the target-language dev split instead of the
    /// source-language one.
    pub select_on_target_dev: bool,
    /// Start a distillation student from the teacher's weights.
    pub student_from_teacher: bool,
    pub checkpoint: Option<PathBuf>,
    pub encoder: EncoderConfig,
    pub interaction: InteractionConfig,
    pub ablation: Ablation,
    pub optimizer: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: Task::Ner,
            seed: 0,
            epochs: 30,
            batch_size: 16,
            patience: 0,
            warmup_steps: 0,
            max_grad_norm: 5.0,
            word_dropout: 0.0,
            min_count: 1,
            eval_every: 1,
            select_on_target_dev: false,
            student_from_teacher: false,
            checkpoint: None,
            encoder: EncoderConfig::default(),
            interaction: InteractionConfig::default(),
            ablation: Ablation::default(),
            optimizer: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Parses and validates; ablation implications are applied on load.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: TrainConfig = toml::from_str(text).map_err(|e| ShineError::Config(e.to_string()))?;
        cfg.ablation = cfg.ablation.resolved();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("train config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.interaction.validate()?;
        if self.epochs == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return Err(ShineError::Config("epochs, batch_size and eval_every must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.word_dropout) {
            return Err(ShineError::Config(format!("word_dropout {} outside [0, 1)", self.word_dropout)));
        }
        if !(self.max_grad_norm >= 0.0) {
            return Err(ShineError::Config("max_grad_norm must be non-negative".into()));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(ShineError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    /// The α actually applied after ablations.
    pub fn effective_alpha(&self) -> f64 {
        if self.ablation.resolved().no_interaction {
            0.0
        } else {
            self.interaction.alpha
        }
    }

    /// Stable 64-bit FNV-1a digest of the canonical TOML form.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_toml().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}
