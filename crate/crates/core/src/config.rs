//! Experiment configuration files.
//!
//! Configs are flat JSON objects whose keys carry a dotted namespace, for
//! example `{"train.strategy": "dpf", "prune.final_sparsity": 0.9}`. Every key
//! is optional; unknown keys are rejected so a misspelled hyperparameter
//! cannot silently fall back to its default. [`ExperimentConfig::to_json`]
//! writes the canonical form: every key present, sorted.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::data::{load_idx, make_blobs, make_spirals, DataSplit};
use crate::error::{Error, Result};
use crate::nn::LayerSpec;
use crate::pruning::{PruneScope, SparsitySchedule};
use crate::train::{steps_per_epoch, LrSchedule, MaskCriterion, Strategy, TrainConfig};

/// Typed access to a flat key/value object that remembers which keys were read.
struct Fields {
    map: Map<String, Value>,
    used: BTreeSet<String>,
}

impl Fields {
    fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        Self::from_value(value)
    }

    fn from_value(value: Value) -> Result<Self> {
        match value {
            Value::Object(map) => Ok(Fields {
                map,
                used: BTreeSet::new(),
            }),
            _ => Err(Error::Config("config must be a JSON object".into())),
        }
    }

    fn get(&mut self, key: &str) -> Option<&Value> {
        self.used.insert(key.to_string());
        match self.map.get(key) {
            Some(Value::Null) | None => None,
            Some(v) => Some(v),
        }
    }

    fn bad(key: &str, want: &str) -> Error {
        Error::Config(format!("`{key}` must be {want}"))
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| Self::bad(key, "a number")),
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64> {
        Ok(self.opt_u64(key)?.unwrap_or(default))
    }

    fn opt_u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.as_u64().map(Some).ok_or_else(|| Self::bad(key, "a non-negative integer")),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64(key, default as u64)? as usize)
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| Self::bad(key, "true or false")),
        }
    }

    fn string(&mut self, key: &str, default: &str) -> Result<String> {
        Ok(self.opt_string(key)?.unwrap_or_else(|| default.to_string()))
    }

    fn opt_string(&mut self, key: &str) -> Result<Option<String>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.as_str().map(|s| Some(s.to_string())).ok_or_else(|| Self::bad(key, "a string")),
        }
    }

    fn u64_list(&mut self, key: &str) -> Result<Option<Vec<u64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_u64().ok_or_else(|| Self::bad(key, "a list of non-negative integers")))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Self::bad(key, "a list of non-negative integers")),
        }
    }

    /// Errors on any key that was never read.
    fn finish(self) -> Result<()> {
        let unknown: Vec<&String> = self.map.keys().filter(|k| !self.used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            let names: Vec<String> = unknown.iter().map(|k| format!("`{k}`")).collect();
            Err(Error::Config(format!("unknown config key(s): {}", names.join(", "))))
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// Where the samples of a run come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Blobs {
        classes: usize,
        dim: usize,
        samples: usize,
        noise: f64,
        seed: u64,
    },
    Spirals {
        classes: usize,
        samples: usize,
        noise: f64,
        seed: u64,
    },
    Idx {
        classes: usize,
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

impl DataSpec {
    pub fn load(&self) -> Result<DataSplit> {
        match self {
            DataSpec::Blobs {
                classes,
                dim,
                samples,
                noise,
                seed,
            } => make_blobs(*classes, *dim, *samples, *noise, *seed),
            DataSpec::Spirals {
                classes,
                samples,
                noise,
                seed,
            } => make_spirals(*classes, *samples, *noise, *seed),
            DataSpec::Idx {
                classes,
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => Ok(DataSplit {
                train: load_idx(train_images, train_labels, *classes)?,
                test: load_idx(test_images, test_labels, *classes)?,
            }),
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            DataSpec::Blobs { classes, .. } | DataSpec::Spirals { classes, .. } | DataSpec::Idx { classes, .. } => *classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrKind {
    StepDecay,
    Constant,
}

/// A training experiment as read from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub strategy: Strategy,
    pub lr: f64,
    pub lr_kind: LrKind,
    /// Epochs after which the learning rate is divided by `lr_decay_factor`.
    pub lr_milestones: Vec<u64>,
    pub lr_decay_factor: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub reparam_period: u64,
    pub finetune_epochs: usize,
    pub finetune_lr: Option<f64>,
    pub seed: u64,
    pub criterion: MaskCriterion,
    pub scope: PruneScope,
    pub initial_sparsity: f64,
    pub final_sparsity: f64,
    pub start_epoch: u64,
    pub ramp_epochs: u64,
    pub frequency_epochs: u64,
    pub data: DataSpec,
    pub hidden: Vec<usize>,
    /// Defaults to `seed`.
    pub init_seed: Option<u64>,
    /// Defaults to `{strategy}_s{seed}`.
    pub run_id: Option<String>,
    pub eval_every: usize,
    /// Save a resumable checkpoint every this many epochs (0 disables).
    pub checkpoint_every: usize,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json_str(&read_text(path)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_fields(Fields::parse(text)?)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        Self::from_fields(Fields::from_value(value)?)
    }

    fn from_fields(mut f: Fields) -> Result<Self> {
        let strategy: Strategy = f.string("train.strategy", "dpf")?.parse()?;
        let epochs = f.usize("train.epochs", 40)?;
        if epochs == 0 {
            return Err(Error::Config("`train.epochs` must be positive".into()));
        }
        let lr_kind = match f.string("train.lr_schedule", "step_decay")?.as_str() {
            "step_decay" => LrKind::StepDecay,
            "constant" => LrKind::Constant,
            other => return Err(Error::Config(format!("unknown lr schedule `{other}`"))),
        };
        let lr_milestones = f
            .u64_list("train.lr_milestones")?
            .unwrap_or_else(|| vec![epochs as u64 / 2, epochs as u64 * 3 / 4]);
        let criterion = match f.string("prune.criterion", "magnitude")?.as_str() {
            "magnitude" => MaskCriterion::Magnitude,
            "row_group_l2" => MaskCriterion::RowGroupL2,
            other => return Err(Error::Config(format!("unknown pruning criterion `{other}`"))),
        };
        let scope = match f.string("prune.scope", "global")?.as_str() {
            "global" => PruneScope::Global,
            "layerwise" => PruneScope::Layerwise,
            other => return Err(Error::Config(format!("unknown pruning scope `{other}`"))),
        };
        let kind = f.string("data.kind", "blobs")?;
        let classes = f.usize("data.classes", 4)?;
        let samples = f.usize("data.samples", 1000)?;
        let noise = f.f64("data.noise", 0.3)?;
        let data_seed = f.u64("data.seed", 0)?;
        let dim = f.usize("data.dim", 20)?;
        let paths = [
            f.opt_string("data.train_images")?,
            f.opt_string("data.train_labels")?,
            f.opt_string("data.test_images")?,
            f.opt_string("data.test_labels")?,
        ];
        let data = match kind.as_str() {
            "blobs" => DataSpec::Blobs {
                classes,
                dim,
                samples,
                noise,
                seed: data_seed,
            },
            "spirals" => DataSpec::Spirals {
                classes,
                samples,
                noise,
                seed: data_seed,
            },
            "idx" => {
                let [Some(a), Some(b), Some(c), Some(d)] = paths else {
                    return Err(Error::Config(
                        "idx data needs data.train_images, data.train_labels, data.test_images and data.test_labels".into(),
                    ));
                };
                DataSpec::Idx {
                    classes,
                    train_images: a.into(),
                    train_labels: b.into(),
                    test_images: c.into(),
                    test_labels: d.into(),
                }
            }
            other => return Err(Error::Config(format!("unknown data kind `{other}`"))),
        };
        let hidden = f
            .u64_list("model.hidden")?
            .map(|v| v.into_iter().map(|h| h as usize).collect())
            .unwrap_or_else(|| vec![64, 64]);
        let cfg = ExperimentConfig {
            strategy,
            lr: f.f64("train.lr", 0.1)?,
            lr_kind,
            lr_milestones,
            lr_decay_factor: f.f64("train.lr_decay_factor", 10.0)?,
            momentum: f.f64("train.momentum", 0.9)?,
            weight_decay: f.f64("train.weight_decay", 1e-4)?,
            batch_size: f.usize("train.batch_size", 32)?,
            epochs,
            reparam_period: f.u64("train.reparam_period", 16)?,
            finetune_epochs: f.usize("train.finetune_epochs", 0)?,
            finetune_lr: f.opt_f64("train.finetune_lr")?,
            seed: f.u64("train.seed", 0)?,
            criterion,
            scope,
            initial_sparsity: f.f64("prune.initial_sparsity", 0.0)?,
            final_sparsity: f.f64("prune.final_sparsity", 0.9)?,
            start_epoch: f.u64("prune.start_epoch", 0)?,
            ramp_epochs: f.u64("prune.ramp_epochs", (epochs as u64 * 3 / 4).max(1))?,
            frequency_epochs: f.u64("prune.frequency_epochs", 1)?,
            data,
            hidden,
            init_seed: f.opt_u64("model.init_seed")?,
            run_id: f.opt_string("output.run_id")?,
            eval_every: f.usize("output.eval_every", 1)?,
            checkpoint_every: f.usize("output.checkpoint_every", 0)?,
        };
        f.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.ramp_epochs == 0 || self.frequency_epochs == 0 {
            return Err(Error::Config("`prune.ramp_epochs` and `prune.frequency_epochs` must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("`model.hidden` widths must be positive".into()));
        }
        if let Some(id) = &self.run_id {
            if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
                return Err(Error::Config(format!("`output.run_id` {id:?} is not a plain directory name")));
            }
        }
        if let DataSpec::Blobs { classes, dim, samples, .. } = self.data {
            if classes < 2 || dim == 0 || samples < 2 {
                return Err(Error::Config("blobs need classes >= 2, dim >= 1 and samples >= 2".into()));
            }
        }
        self.train_config(1).map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })?;
        Ok(())
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed.unwrap_or(self.seed)
    }

    pub fn run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| format!("{}_s{}", self.strategy, self.seed))
    }

    /// Layer specs for a dataset with `input_dim` features.
    pub fn layer_specs(&self, input_dim: usize) -> Vec<LayerSpec> {
        let mut dims = vec![input_dim];
        dims.extend(&self.hidden);
        dims.push(self.data.classes());
        LayerSpec::chain(&dims)
    }

    /// Resolves epoch-denominated settings into optimizer steps.
    pub fn train_config(&self, n_train: usize) -> Result<TrainConfig> {
        let spe = steps_per_epoch(n_train, self.batch_size)?;
        let lr = match self.lr_kind {
            LrKind::Constant => LrSchedule::Constant(self.lr),
            LrKind::StepDecay => LrSchedule::StepDecay {
                initial: self.lr,
                milestones: self.lr_milestones.iter().map(|e| e * spe).collect(),
                factor: self.lr_decay_factor,
            },
        };
        let schedule = SparsitySchedule::new(
            self.initial_sparsity,
            self.final_sparsity,
            self.start_epoch * spe,
            self.ramp_epochs * spe,
            self.frequency_epochs * spe,
        )?;
        let cfg = TrainConfig {
            strategy: self.strategy,
            lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            reparam_period: self.reparam_period,
            schedule,
            scope: self.scope,
            criterion: self.criterion,
            seed: self.seed,
            finetune_epochs: self.finetune_epochs,
            finetune_lr: self.finetune_lr,
            eval_every: self.eval_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical flat form: all keys, sorted, defaults made explicit.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        put("train.strategy", self.strategy.as_str().into());
        put("train.lr", self.lr.into());
        put(
            "train.lr_schedule",
            match self.lr_kind {
                LrKind::StepDecay => "step_decay",
                LrKind::Constant => "constant",
            }
            .into(),
        );
        put("train.lr_milestones", self.lr_milestones.clone().into());
        put("train.lr_decay_factor", self.lr_decay_factor.into());
        put("train.momentum", self.momentum.into());
        put("train.weight_decay", self.weight_decay.into());
        put("train.batch_size", self.batch_size.into());
        put("train.epochs", self.epochs.into());
        put("train.reparam_period", self.reparam_period.into());
        put("train.finetune_epochs", self.finetune_epochs.into());
        put("train.finetune_lr", self.finetune_lr.into());
        put("train.seed", self.seed.into());
        put(
            "prune.criterion",
            match self.criterion {
                MaskCriterion::Magnitude => "magnitude",
                MaskCriterion::RowGroupL2 => "row_group_l2",
            }
            .into(),
        );
        put(
            "prune.scope",
            match self.scope {
                PruneScope::Global => "global",
                PruneScope::Layerwise => "layerwise",
            }
            .into(),
        );
        put("prune.initial_sparsity", self.initial_sparsity.into());
        put("prune.final_sparsity", self.final_sparsity.into());
        put("prune.start_epoch", self.start_epoch.into());
        put("prune.ramp_epochs", self.ramp_epochs.into());
        put("prune.frequency_epochs", self.frequency_epochs.into());
        let (kind, classes) = match &self.data {
            DataSpec::Blobs { .. } => ("blobs", self.data.classes()),
            DataSpec::Spirals { .. } => ("spirals", self.data.classes()),
            DataSpec::Idx { .. } => ("idx", self.data.classes()),
        };
        put("data.kind", kind.into());
        put("data.classes", classes.into());
        let (mut dim, mut samples, mut noise, mut seed) = (Value::Null, Value::Null, Value::Null, Value::Null);
        let mut paths = [Value::Null, Value::Null, Value::Null, Value::Null];
        match &self.data {
            DataSpec::Blobs {
                dim: d,
                samples: n,
                noise: s,
                seed: r,
                ..
            } => {
                dim = (*d).into();
                samples = (*n).into();
                noise = (*s).into();
                seed = (*r).into();
            }
            DataSpec::Spirals {
                samples: n,
                noise: s,
                seed: r,
                ..
            } => {
                samples = (*n).into();
                noise = (*s).into();
                seed = (*r).into();
            }
            DataSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                ..
            } => {
                for (slot, p) in paths.iter_mut().zip([train_images, train_labels, test_images, test_labels]) {
                    *slot = p.to_string_lossy().into_owned().into();
                }
            }
        }
        put("data.dim", dim);
        put("data.samples", samples);
        put("data.noise", noise);
        put("data.seed", seed);
        let [a, b, c, d] = paths;
        put("data.train_images", a);
        put("data.train_labels", b);
        put("data.test_images", c);
        put("data.test_labels", d);
        put("model.hidden", self.hidden.clone().into());
        put("model.init_seed", self.init_seed.into());
        put("output.run_id", self.run_id.clone().into());
        put("output.eval_every", self.eval_every.into());
        put("output.checkpoint_every", self.checkpoint_every.into());
        Value::Object(m)
    }
}

/// Which convex experiment a lab config runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabTheorem {
    /// Strongly convex quadratic, decreasing steps.
    Thm1,
    /// Coupled double well, constant step.
    Thm2,
    /// DPF against pruning the last SGD iterate.
    OneShot,
}

impl LabTheorem {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabTheorem::Thm1 => "thm1",
            LabTheorem::Thm2 => "thm2",
            LabTheorem::OneShot => "one_shot",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabConfig {
    pub theorem: LabTheorem,
    pub dim: usize,
    pub mu: f64,
    pub l: f64,
    pub noise: f64,
    pub sparsity: f64,
    pub horizons: Vec<u64>,
    pub seeds: u64,
    pub seed: u64,
    pub period: u64,
    /// Double-well coupling.
    pub coupling: f64,
    /// Double-well operating box half-width.
    pub radius: f64,
    /// Ball radius as a multiple of `‖x*‖` for the quadratic (0 disables).
    pub projection_scale: f64,
    /// Quadratic minimizer supported on the kept coordinates, with the mask
    /// fixed to that support.
    pub aligned: bool,
    pub run_id: Option<String>,
}

impl LabConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json_str(&read_text(path)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_fields(Fields::parse(text)?)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        Self::from_fields(Fields::from_value(value)?)
    }

    fn from_fields(mut f: Fields) -> Result<Self> {
        let theorem = match f.string("lab.theorem", "thm1")?.as_str() {
            "thm1" => LabTheorem::Thm1,
            "thm2" => LabTheorem::Thm2,
            "one_shot" => LabTheorem::OneShot,
            other => return Err(Error::Config(format!("unknown lab theorem `{other}`"))),
        };
        let default_dim = if theorem == LabTheorem::Thm2 { 20 } else { 50 };
        let cfg = LabConfig {
            theorem,
            dim: f.usize("lab.dim", default_dim)?,
            mu: f.f64("lab.mu", 1.0)?,
            l: f.f64("lab.L", 100.0)?,
            noise: f.f64("lab.noise", 1.0)?,
            sparsity: f.f64("lab.sparsity", if theorem == LabTheorem::OneShot { 0.9 } else { 0.0 })?,
            horizons: f.u64_list("lab.horizons")?.unwrap_or_else(|| vec![100, 1000, 10_000]),
            seeds: f.u64("lab.seeds", 10)?,
            seed: f.u64("lab.seed", 0)?,
            period: f.u64("lab.period", 16)?,
            coupling: f.f64("lab.coupling", 0.1)?,
            radius: f.f64("lab.radius", 1.5)?,
            projection_scale: f.f64("lab.projection_scale", 2.0)?,
            aligned: f.bool("lab.aligned", false)?,
            run_id: f.opt_string("output.run_id")?,
        };
        f.finish()?;
        if cfg.dim == 0 || cfg.seeds == 0 || cfg.period == 0 || cfg.horizons.is_empty() {
            return Err(Error::Config("lab.dim, lab.seeds, lab.period and lab.horizons must be non-empty/positive".into()));
        }
        if !(cfg.mu > 0.0 && cfg.mu <= cfg.l) {
            return Err(Error::Config(format!("need 0 < lab.mu <= lab.L, got {} and {}", cfg.mu, cfg.l)));
        }
        if !(0.0..=1.0).contains(&cfg.sparsity) || !(cfg.noise >= 0.0) || !(cfg.projection_scale >= 0.0) {
            return Err(Error::Config("lab.sparsity must lie in [0, 1]; noise and projection_scale must be >= 0".into()));
        }
        if theorem == LabTheorem::Thm2 && cfg.horizons.contains(&0) {
            return Err(Error::Config("the nonconvex lab needs horizons >= 1".into()));
        }
        Ok(cfg)
    }

    pub fn run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| format!("lab_{}_s{}", self.theorem.as_str(), self.seed))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (self.seed..self.seed + self.seeds).collect()
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("lab.theorem".into(), self.theorem.as_str().into());
        m.insert("lab.dim".into(), self.dim.into());
        m.insert("lab.mu".into(), self.mu.into());
        m.insert("lab.L".into(), self.l.into());
        m.insert("lab.noise".into(), self.noise.into());
        m.insert("lab.sparsity".into(), self.sparsity.into());
        m.insert("lab.horizons".into(), self.horizons.clone().into());
        m.insert("lab.seeds".into(), self.seeds.into());
        m.insert("lab.seed".into(), self.seed.into());
        m.insert("lab.period".into(), self.period.into());
        m.insert("lab.coupling".into(), self.coupling.into());
        m.insert("lab.radius".into(), self.radius.into());
        m.insert("lab.projection_scale".into(), self.projection_scale.into());
        m.insert("lab.aligned".into(), self.aligned.into());
        m.insert("output.run_id".into(), self.run_id.clone().into());
        Value::Object(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json_str("{}").unwrap();
        assert_eq!(c.strategy, Strategy::Dpf);
        assert_eq!(c.lr_milestones, vec![20, 30]);
        assert_eq!(c.run_id(), "dpf_s0");
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = ExperimentConfig::from_json_str(r#"{"train.learning_rate": 0.1}"#).unwrap_err();
        assert!(e.to_string().contains("train.learning_rate"));
    }

    #[test]
    fn wrong_types_rejected() {
        assert!(ExperimentConfig::from_json_str(r#"{"train.epochs": "ten"}"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"[1, 2]"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{"prune.final_sparsity": 1.5}"#).is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let c = ExperimentConfig::from_json_str(r#"{"train.strategy": "incremental_monotone", "train.epochs": 8, "model.hidden": [16]}"#).unwrap();
        let canon = c.to_json();
        let back = ExperimentConfig::from_value(canon.clone()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), canon);
    }

    #[test]
    fn lab_round_trip() {
        let c = LabConfig::from_json_str(r#"{"lab.theorem": "thm2", "lab.horizons": [100]}"#).unwrap();
        assert_eq!(c.dim, 20);
        assert_eq!(LabConfig::from_value(c.to_json()).unwrap(), c);
    }
}
