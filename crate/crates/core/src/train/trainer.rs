use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{Checkpoint, RngState};
use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::metrics::{flip_count, mask_iou, MaskHistory, StepRecord};
use crate::nn::{LayerSpec, Mlp};
use crate::pruning::{apply_mask, delta_of, magnitude_mask, row_group_l2, snip_mask, Mask};

use super::step::{dpf_step, masked_step, maybe_update_mask, TrainState};
use super::{steps_per_epoch, MaskCriterion, Phase, Saliency, Strategy, TrainConfig};

/// Sample order for one epoch, fixed by `(seed, epoch)`.
pub fn epoch_order(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Everything a finished run hands back.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Dense iterate at the end of the main phase.
    pub final_dense: Vec<f64>,
    /// Model that is evaluated and deployed (`mask ⊙ x` at the end).
    pub final_sparse: Vec<f64>,
    pub mask: Mask,
    pub records: Vec<StepRecord>,
    pub history: MaskHistory,
    pub steps: u64,
    pub steps_per_epoch: u64,
    pub max_grad_norm: f64,
}

/// Epoch-granular driver around the step engine.
pub struct Trainer<'a> {
    model: &'a Mlp,
    data: &'a DataSplit,
    cfg: TrainConfig,
    state: TrainState,
    phase: Phase,
    epoch: u64,
    seed: u64,
    spe: u64,
    total_epochs: u64,
    history: MaskHistory,
    records: Vec<StepRecord>,
    last_record_mask: Mask,
    main_dense: Option<Vec<f64>>,
    last_lr: f64,
}

impl<'a> Trainer<'a> {
    /// Starts a run from the model's current parameters.
    pub fn new(model: &'a Mlp, data: &'a DataSplit, cfg: TrainConfig) -> Result<Self> {
        let mut trainer = Self::bare(model, data, cfg)?;
        if let Strategy::BeforeTraining(saliency) = trainer.cfg.strategy {
            let target = trainer.cfg.schedule.target;
            let x0 = &trainer.state.x;
            let mask = match saliency {
                Saliency::Magnitude => trainer.criterion_mask(x0, target)?,
                Saliency::Snip => {
                    let order = epoch_order(trainer.seed, 0, data.train.len());
                    let first = &order[..trainer.cfg.batch_size.min(order.len())];
                    snip_mask(model, x0, &data.train.batch(first), target)?
                }
            };
            trainer.install_fixed(mask, target)?;
        }
        Ok(trainer)
    }

    /// Trains with `mask` held fixed from step 0 (weights outside it are
    /// zeroed first). Used for winning-ticket retraining.
    pub fn with_fixed_mask(model: &'a Mlp, data: &'a DataSplit, mut cfg: TrainConfig, mask: Mask) -> Result<Self> {
        cfg.strategy = Strategy::BeforeTraining(Saliency::Magnitude);
        let mut trainer = Self::bare(model, data, cfg)?;
        let target = mask.sparsity();
        trainer.install_fixed(mask, target)?;
        Ok(trainer)
    }

    /// Fine-tunes `x_start` under a fixed `mask`, as the phase that follows
    /// `cfg.epochs` main epochs.
    pub fn for_finetune(model: &'a Mlp, data: &'a DataSplit, cfg: TrainConfig, x_start: Vec<f64>, mask: Mask) -> Result<Self> {
        let mut trainer = Self::bare(model, data, cfg)?;
        trainer.state.x = x_start;
        trainer.state.t = trainer.cfg.epochs as u64 * trainer.spe;
        trainer.epoch = trainer.cfg.epochs as u64;
        trainer.total_epochs = (trainer.cfg.epochs + trainer.cfg.finetune_epochs) as u64;
        trainer.main_dense = Some(trainer.state.x.clone());
        trainer.last_lr = trainer.cfg.lr.rate(trainer.state.t.saturating_sub(1));
        let target = mask.sparsity();
        trainer.install_fixed(mask, target)?;
        trainer.phase = Phase::Finetune;
        Ok(trainer)
    }

    /// Continues a run from a checkpoint taken at an epoch boundary.
    pub fn resume(model: &'a Mlp, data: &'a DataSplit, cfg: TrainConfig, ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.specs != model.specs() {
            return Err(Error::invalid("checkpoint architecture differs from the model"));
        }
        let mut trainer = Self::bare(model, data, cfg)?;
        if ckpt.rng.seed != trainer.seed {
            log::warn!("resuming with checkpoint seed {} instead of {}", ckpt.rng.seed, trainer.seed);
            trainer.seed = ckpt.rng.seed;
        }
        trainer.state.x = ckpt.params.clone();
        trainer.state.v = ckpt.momentum.clone();
        trainer.state.t = ckpt.step;
        trainer.state.mask_target = ckpt.mask_target;
        trainer.state.max_grad_norm = ckpt.max_grad_norm;
        trainer.state.set_mask(ckpt.mask.clone())?;
        trainer.epoch = ckpt.rng.epoch;
        trainer.phase = ckpt.phase;
        trainer.last_record_mask = ckpt.mask.clone();
        trainer.last_lr = trainer.cfg.lr.rate(ckpt.step.saturating_sub(1));
        if trainer.phase == Phase::Finetune {
            // the dense iterate of the main phase is not part of a checkpoint
            trainer.main_dense = Some(trainer.state.x.clone());
        }
        Ok(trainer)
    }

    fn bare(model: &'a Mlp, data: &'a DataSplit, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if data.train.dim() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                layer: 0,
                expected: model.input_dim(),
                found: data.train.dim(),
            });
        }
        if data.train.num_classes() > model.num_classes() {
            return Err(Error::invalid(format!(
                "dataset has {} classes but the model outputs {}",
                data.train.num_classes(),
                model.num_classes()
            )));
        }
        let spe = steps_per_epoch(data.train.len(), cfg.batch_size)?;
        let state = TrainState::new(model.params().to_vec(), model.layout())?;
        Ok(Trainer {
            model,
            data,
            seed: cfg.seed,
            spe,
            total_epochs: cfg.total_epochs() as u64,
            last_record_mask: state.mask.clone(),
            last_lr: cfg.lr.rate(0),
            cfg,
            state,
            phase: Phase::Main,
            epoch: 0,
            history: MaskHistory::new(),
            records: Vec::new(),
            main_dense: None,
        })
    }

    fn criterion_mask(&self, params: &[f64], sparsity: f64) -> Result<Mask> {
        let layout = self.model.layout();
        match self.cfg.criterion {
            MaskCriterion::Magnitude => magnitude_mask(params, layout, sparsity, self.cfg.scope),
            MaskCriterion::RowGroupL2 => row_group_l2(params, layout, sparsity),
        }
    }

    fn install_fixed(&mut self, mask: Mask, target: f64) -> Result<()> {
        self.state.x = apply_mask(&self.state.x, &mask)?;
        self.state.v.iter_mut().for_each(|v| *v = 0.0);
        self.state.mask_target = target;
        self.state.set_mask(mask.clone())?;
        self.history.push(self.state.t, self.epoch, mask.clone())?;
        self.last_record_mask = mask;
        Ok(())
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn total_epochs(&self) -> u64 {
        self.total_epochs
    }

    pub fn steps_per_epoch(&self) -> u64 {
        self.spe
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn history(&self) -> &MaskHistory {
        &self.history
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.total_epochs
    }

    fn finetune_lr(&self) -> f64 {
        self.cfg.finetune_lr.unwrap_or(self.last_lr)
    }

    /// One-shot pruning of the last dense iterate, taken as soon as the main
    /// phase ends so the final record and outputs see the pruned model.
    fn prune_one_shot(&mut self) -> Result<()> {
        let target = self.cfg.schedule.target;
        let mask = self.criterion_mask(&self.state.x, target)?;
        self.state.mask_target = target;
        self.state.set_mask(mask.clone())?;
        self.history.push(self.state.t, self.epoch, mask)
    }

    /// Ends the main phase: keeps the dense iterate, moves onto the pruned
    /// point and resets momentum for fine-tuning.
    fn enter_finetune(&mut self) -> Result<()> {
        self.main_dense = Some(self.state.x.clone());
        self.state.x = self.state.x_hat.clone();
        self.state.v.iter_mut().for_each(|v| *v = 0.0);
        self.state.refresh();
        self.phase = Phase::Finetune;
        Ok(())
    }

    /// Runs one epoch and records metrics when due. Returns the new record,
    /// if one was taken.
    pub fn run_epoch(&mut self) -> Result<Option<StepRecord>> {
        if self.is_done() {
            return Ok(None);
        }
        if self.phase == Phase::Main && self.epoch >= self.cfg.epochs as u64 {
            self.enter_finetune()?;
        }
        let order = epoch_order(self.seed, self.epoch, self.data.train.len());
        let layout = self.model.layout();
        for chunk in order.chunks(self.cfg.batch_size) {
            let batch = self.data.train.batch(chunk);
            match self.phase {
                Phase::Finetune => {
                    let lr = self.finetune_lr();
                    masked_step(&mut self.state, self.model, &batch, lr, &self.cfg)?;
                }
                Phase::Main => {
                    if maybe_update_mask(&mut self.state, layout, &self.cfg)? {
                        self.history.push(self.state.t, self.epoch, self.state.mask.clone())?;
                    }
                    let lr = self.cfg.lr.rate(self.state.t);
                    self.last_lr = lr;
                    match self.cfg.strategy {
                        Strategy::Dense | Strategy::OneShot | Strategy::Dpf => {
                            dpf_step(&mut self.state, self.model, &batch, lr, &self.cfg)?;
                        }
                        Strategy::BeforeTraining(_) | Strategy::Incremental { .. } => {
                            masked_step(&mut self.state, self.model, &batch, lr, &self.cfg)?;
                        }
                    }
                }
            }
        }
        self.epoch += 1;
        if self.phase == Phase::Main && self.epoch == self.cfg.epochs as u64 && self.cfg.strategy == Strategy::OneShot {
            self.prune_one_shot()?;
        }
        let due = self.epoch % self.cfg.eval_every as u64 == 0 || self.is_done();
        if !due {
            return Ok(None);
        }
        let record = self.record()?;
        self.records.push(record.clone());
        Ok(Some(record))
    }

    fn record(&mut self) -> Result<StepRecord> {
        let train = self.model.evaluate(&self.state.x_hat, &self.data.train)?;
        let test = self.model.evaluate(&self.state.x_hat, &self.data.test)?;
        let mask = &self.state.mask;
        let rec = StepRecord {
            step: self.state.t,
            epoch: self.epoch,
            lr: match self.phase {
                Phase::Main => self.last_lr,
                Phase::Finetune => self.finetune_lr(),
            },
            train_loss: train.loss,
            train_acc: train.accuracy,
            test_loss: test.loss,
            test_acc: test.accuracy,
            sparsity_target: self.state.mask_target,
            sparsity_achieved: mask.sparsity(),
            delta: delta_of(&self.state.x, &self.state.x_hat)?,
            flips_since_last: flip_count(&self.last_record_mask, mask)? as u64,
            iou: mask_iou(&self.last_record_mask, mask)?,
        };
        self.last_record_mask = mask.clone();
        log::info!(
            "epoch {} step {} loss {:.4} test acc {:.4} sparsity {:.3}",
            rec.epoch,
            rec.step,
            rec.train_loss,
            rec.test_acc,
            rec.sparsity_achieved
        );
        Ok(rec)
    }

    /// Snapshot of the run at the current epoch boundary.
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            specs: self.model.specs().to_vec(),
            params: self.state.x.clone(),
            mask: self.state.mask.clone(),
            momentum: self.state.v.clone(),
            step: self.state.t,
            rng: RngState {
                seed: self.seed,
                epoch: self.epoch,
            },
            phase: self.phase,
            mask_target: self.state.mask_target,
            max_grad_norm: self.state.max_grad_norm,
        }
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_done() {
            self.run_epoch()?;
        }
        Ok(())
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome {
            final_dense: self.main_dense.unwrap_or_else(|| self.state.x.clone()),
            final_sparse: self.state.x_hat,
            mask: self.state.mask,
            records: self.records,
            history: self.history,
            steps: self.state.t,
            steps_per_epoch: self.spe,
            max_grad_norm: self.state.max_grad_norm,
        }
    }
}

/// Trains `model` from its current parameters to the end of the configured run.
pub fn run_training(model: &Mlp, data: &DataSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(model, data, cfg.clone())?;
    trainer.run_to_end()?;
    Ok(trainer.finish())
}

/// Fine-tunes the pruned model `mask ⊙ x_start` for `cfg.finetune_epochs`
/// epochs of masked SGD and returns the final sparse parameters.
pub fn finetune(model: &Mlp, x_start: &[f64], mask: &Mask, data: &DataSplit, cfg: &TrainConfig) -> Result<Vec<f64>> {
    if cfg.finetune_epochs == 0 {
        return apply_mask(x_start, mask);
    }
    let mut trainer = Trainer::for_finetune(model, data, cfg.clone(), x_start.to_vec(), mask.clone())?;
    trainer.run_to_end()?;
    Ok(trainer.finish().final_sparse)
}

/// Re-initializes the architecture with `init_seed` and trains it from
/// scratch with `mask` fixed throughout.
pub fn lottery_retrain(specs: &[LayerSpec], mask: &Mask, init_seed: u64, data: &DataSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let model = Mlp::new(specs.to_vec(), init_seed)?;
    let mut trainer = Trainer::with_fixed_mask(&model, data, cfg.clone(), mask.clone())?;
    trainer.run_to_end()?;
    Ok(trainer.finish())
}
