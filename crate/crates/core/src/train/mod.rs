//! Training strategies sharing one step engine: dense SGD, pruning before
//! training, one-shot pruning after training, incremental pruning and dynamic
//! pruning with feedback (DPF).

mod step;
mod trainer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pruning::{PruneScope, SparsitySchedule};

pub use step::{dpf_step, dpf_step_via_error, masked_step, maybe_update_mask, TrainState};
pub use trainer::{epoch_order, finetune, lottery_retrain, run_training, TrainOutcome, Trainer};

/// How a before-training mask is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Saliency {
    Magnitude,
    Snip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Plain SGD, never pruned.
    Dense,
    /// Mask chosen once at initialization and kept fixed; gradients masked.
    BeforeTraining(Saliency),
    /// Dense training, then one magnitude mask on the final iterate
    /// (optionally followed by fine-tuning).
    OneShot,
    /// Gradual schedule with masked gradients; `monotone` forbids regrowth.
    Incremental { monotone: bool },
    /// Gradient at the pruned model applied to the dense model.
    Dpf,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Dense => "dense",
            Strategy::BeforeTraining(Saliency::Magnitude) => "before_training_magnitude",
            Strategy::BeforeTraining(Saliency::Snip) => "before_training_snip",
            Strategy::OneShot => "one_shot_ft",
            Strategy::Incremental { monotone: false } => "incremental",
            Strategy::Incremental { monotone: true } => "incremental_monotone",
            Strategy::Dpf => "dpf",
        }
    }

    pub fn prunes(&self) -> bool {
        !matches!(self, Strategy::Dense)
    }

    /// Strategies whose mask follows the sparsity schedule during training.
    pub fn is_gradual(&self) -> bool {
        matches!(self, Strategy::Incremental { .. } | Strategy::Dpf)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dense" => Strategy::Dense,
            "before_training" | "before_training_magnitude" => Strategy::BeforeTraining(Saliency::Magnitude),
            "before_training_snip" | "snip" => Strategy::BeforeTraining(Saliency::Snip),
            "one_shot_ft" | "one_shot" => Strategy::OneShot,
            "incremental" => Strategy::Incremental { monotone: false },
            "incremental_monotone" => Strategy::Incremental { monotone: true },
            "dpf" => Strategy::Dpf,
            other => return Err(Error::Config(format!("unknown strategy `{other}`"))),
        })
    }
}

/// Mask criterion used at update events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskCriterion {
    #[default]
    Magnitude,
    /// Whole output-neuron rows by l2 norm (global scope).
    RowGroupL2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant(f64),
    /// `initial / factor^k` after the k-th milestone (in steps).
    StepDecay {
        initial: f64,
        milestones: Vec<u64>,
        factor: f64,
    },
    /// `4 / (mu (t + 2))`.
    InverseTime { mu: f64 },
    /// Constant `c / sqrt(horizon)`.
    Horizon { c: f64, horizon: u64 },
}

impl LrSchedule {
    pub fn rate(&self, t: u64) -> f64 {
        match self {
            LrSchedule::Constant(g) => *g,
            LrSchedule::StepDecay {
                initial,
                milestones,
                factor,
            } => {
                let passed = milestones.iter().filter(|&&m| t >= m).count();
                initial / factor.powi(passed as i32)
            }
            LrSchedule::InverseTime { mu } => 4.0 / (mu * (t as f64 + 2.0)),
            LrSchedule::Horizon { c, horizon } => c / (*horizon as f64).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            LrSchedule::Constant(g) => *g > 0.0,
            LrSchedule::StepDecay { initial, factor, .. } => *initial > 0.0 && *factor > 0.0,
            LrSchedule::InverseTime { mu } => *mu > 0.0,
            LrSchedule::Horizon { c, horizon } => *c > 0.0 && *horizon > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("learning-rate schedule {self:?} has a non-positive rate")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub lr: LrSchedule,
    /// Nesterov momentum factor.
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Steps between mask recomputations.
    pub reparam_period: u64,
    pub schedule: SparsitySchedule,
    pub scope: PruneScope,
    pub criterion: MaskCriterion,
    pub seed: u64,
    pub finetune_epochs: usize,
    /// Defaults to the last learning rate of the main phase.
    pub finetune_lr: Option<f64>,
    /// Evaluation cadence in epochs; the final epoch is always recorded.
    pub eval_every: usize,
}

impl TrainConfig {
    /// Defaults for a desk-scale classification run: lr 0.1 decayed by 10 at
    /// 50% and 75% of training, Nesterov 0.9, mask updates every 16 steps, and
    /// a cubic ramp from 0 to `target_sparsity` that ends at the second decay
    /// with one pruning event per epoch.
    pub fn standard(strategy: Strategy, target_sparsity: f64, epochs: usize, n_train: usize, batch_size: usize) -> Result<Self> {
        let spe = steps_per_epoch(n_train, batch_size)?;
        let milestones = vec![(epochs as u64 * spe) / 2, (epochs as u64 * spe * 3) / 4];
        let ramp = ((epochs as u64 * 3) / 4).max(1) * spe;
        Ok(TrainConfig {
            strategy,
            lr: LrSchedule::StepDecay {
                initial: 0.1,
                milestones,
                factor: 10.0,
            },
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size,
            epochs,
            reparam_period: 16,
            schedule: SparsitySchedule::new(0.0, target_sparsity, 0, ramp, spe)?,
            scope: PruneScope::Global,
            criterion: MaskCriterion::Magnitude,
            seed: 0,
            finetune_epochs: 0,
            finetune_lr: None,
            eval_every: 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.lr.validate()?;
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        if self.batch_size == 0 || self.reparam_period == 0 || self.eval_every == 0 {
            return Err(Error::invalid("batch_size, reparam_period and eval_every must be positive"));
        }
        if let Some(lr) = self.finetune_lr {
            if !(lr > 0.0) {
                return Err(Error::invalid("finetune lr must be positive"));
            }
        }
        Ok(())
    }

    /// Total epochs including the fine-tuning phase.
    pub fn total_epochs(&self) -> usize {
        self.epochs + if self.strategy.prunes() { self.finetune_epochs } else { 0 }
    }
}

/// `ceil(n_train / batch_size)`.
pub fn steps_per_epoch(n_train: usize, batch_size: usize) -> Result<u64> {
    if n_train == 0 {
        return Err(Error::EmptyDataset);
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    Ok(n_train.div_ceil(batch_size) as u64)
}

/// Which part of a run a trainer is in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Main = 0,
    Finetune = 1,
}

impl Phase {
    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Phase::Main),
            1 => Ok(Phase::Finetune),
            other => Err(Error::Format(format!("unknown phase tag {other}"))),
        }
    }
}
