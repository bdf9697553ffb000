use crate::error::{check_len, Error, Result};
use crate::nn::{Batch, Mlp, ParamLayout};
use crate::pruning::{apply_mask_into, magnitude_mask, mask_from_scores, row_group_l2, Mask};

use super::{MaskCriterion, Strategy, TrainConfig};

/// Mutable optimizer state shared by every strategy.
///
/// `x` is the dense iterate, `x_hat = mask ⊙ x` the pruned model and
/// `e = x_hat - x` the residual that error feedback adds back.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub x: Vec<f64>,
    /// Momentum buffer.
    pub v: Vec<f64>,
    pub mask: Mask,
    /// Number of optimizer steps taken so far.
    pub t: u64,
    pub x_hat: Vec<f64>,
    pub e: Vec<f64>,
    pub mask_target: f64,
    pub max_grad_norm: f64,
}

impl TrainState {
    pub fn new(x: Vec<f64>, layout: &ParamLayout) -> Result<Self> {
        check_len(layout.len(), x.len())?;
        let d = x.len();
        let mut s = TrainState {
            v: vec![0.0; d],
            mask: Mask::ones(layout),
            t: 0,
            x_hat: vec![0.0; d],
            e: vec![0.0; d],
            mask_target: 0.0,
            max_grad_norm: 0.0,
            x,
        };
        s.refresh();
        Ok(s)
    }

    pub fn set_mask(&mut self, mask: Mask) -> Result<()> {
        check_len(self.x.len(), mask.len())?;
        self.mask = mask;
        self.refresh();
        Ok(())
    }

    /// Recomputes `x_hat` and `e` from `x` and the mask.
    pub fn refresh(&mut self) {
        apply_mask_into(&self.x, &self.mask, &mut self.x_hat).expect("state lengths agree");
        for ((e, &xh), &x) in self.e.iter_mut().zip(&self.x_hat).zip(&self.x) {
            *e = xh - x;
        }
    }

    fn apply_update(&mut self, grad: &[f64], lr: f64, momentum: f64) {
        for ((x, v), &g) in self.x.iter_mut().zip(self.v.iter_mut()).zip(grad) {
            *v = momentum * *v + g;
            *x -= lr * (g + momentum * *v);
        }
        self.t += 1;
        self.refresh();
    }

    fn track_norm(&mut self, grad: &[f64]) -> Result<()> {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite gradient at step {}", self.t)));
        }
        self.max_grad_norm = self.max_grad_norm.max(norm);
        Ok(())
    }
}

fn gradient_at(model: &Mlp, point: &[f64], batch: &Batch, weight_decay: f64) -> Result<(f64, Vec<f64>)> {
    let (loss, mut grad) = model.loss_and_grad(point, batch)?;
    if weight_decay > 0.0 {
        for (g, &p) in grad.iter_mut().zip(point) {
            *g += weight_decay * p;
        }
    }
    Ok((loss, grad))
}

/// One DPF step: the stochastic gradient is evaluated at the pruned model
/// `x_hat` and applied to every coordinate of the dense model `x`. With an
/// all-ones mask this is an ordinary dense SGD step. Returns the batch loss.
pub fn dpf_step(state: &mut TrainState, model: &Mlp, batch: &Batch, lr: f64, cfg: &TrainConfig) -> Result<f64> {
    let (loss, grad) = gradient_at(model, &state.x_hat, batch, cfg.weight_decay)?;
    state.track_norm(&grad)?;
    state.apply_update(&grad, lr, cfg.momentum);
    Ok(loss)
}

/// The same step written as error feedback: the gradient is taken at
/// `x + e`. Produces bitwise the same iterate as [`dpf_step`] because
/// `x + (m⊙x - x)` equals `m⊙x` exactly for `m ∈ {0, 1}`.
pub fn dpf_step_via_error(state: &mut TrainState, model: &Mlp, batch: &Batch, lr: f64, cfg: &TrainConfig) -> Result<f64> {
    let point: Vec<f64> = state.x.iter().zip(&state.e).map(|(x, e)| x + e).collect();
    let (loss, grad) = gradient_at(model, &point, batch, cfg.weight_decay)?;
    state.track_norm(&grad)?;
    state.apply_update(&grad, lr, cfg.momentum);
    Ok(loss)
}

/// A step that only moves unpruned coordinates: the gradient at `x_hat` is
/// masked before the momentum update, so pruned entries of `x` stay frozen.
pub fn masked_step(state: &mut TrainState, model: &Mlp, batch: &Batch, lr: f64, cfg: &TrainConfig) -> Result<f64> {
    let (loss, mut grad) = gradient_at(model, &state.x_hat, batch, cfg.weight_decay)?;
    for (g, &keep) in grad.iter_mut().zip(state.mask.bits()) {
        if !keep {
            *g = 0.0;
        }
    }
    state.track_norm(&grad)?;
    state.apply_update(&grad, lr, cfg.momentum);
    Ok(loss)
}

fn criterion_mask(params: &[f64], layout: &ParamLayout, sparsity: f64, cfg: &TrainConfig) -> Result<Mask> {
    match cfg.criterion {
        MaskCriterion::Magnitude => magnitude_mask(params, layout, sparsity, cfg.scope),
        MaskCriterion::RowGroupL2 => row_group_l2(params, layout, sparsity),
    }
}

/// Recomputes the mask when `t` is a multiple of the reparametrization
/// period, before the step at `t` is taken. Only gradual strategies react.
///
/// Both DPF and incremental pruning rank the dense iterate `x`. Under DPF the
/// pruned coordinates keep receiving updates and can re-enter the support;
/// under incremental pruning they are frozen at their last value. The
/// monotone variant additionally ranks every previously pruned coordinate
/// first and intersects with the old mask, so the support only shrinks.
///
/// Returns whether a new mask was installed.
pub fn maybe_update_mask(state: &mut TrainState, layout: &ParamLayout, cfg: &TrainConfig) -> Result<bool> {
    if !cfg.strategy.is_gradual() || state.t % cfg.reparam_period != 0 {
        return Ok(false);
    }
    let target = cfg.schedule.sparsity_at(state.t);
    let mask = match cfg.strategy {
        Strategy::Incremental { monotone: true } => {
            let fresh = match cfg.criterion {
                MaskCriterion::Magnitude => {
                    let scores: Vec<f64> = state
                        .x
                        .iter()
                        .zip(state.mask.bits())
                        .map(|(x, &keep)| if keep { x.abs() } else { -1.0 })
                        .collect();
                    mask_from_scores(&scores, layout, target, cfg.scope)?
                }
                MaskCriterion::RowGroupL2 => row_group_l2(&state.x_hat, layout, target)?,
            };
            fresh.intersect(&state.mask)?
        }
        _ => criterion_mask(&state.x, layout, target, cfg)?,
    };
    state.mask_target = target;
    state.set_mask(mask)?;
    Ok(true)
}
