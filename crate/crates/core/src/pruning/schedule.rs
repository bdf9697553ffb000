use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cubic sparsity ramp from `initial` to `target` over `ramp_steps` optimizer
/// steps starting at `start`:
///
/// `s_t = s_f + (s_i - s_f) * (1 - (t - t_0) / ramp)^3`
///
/// The ramp is evaluated on a grid of `update_every` steps, so the target stays
/// piecewise constant between pruning events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsitySchedule {
    pub initial: f64,
    pub target: f64,
    pub start: u64,
    pub ramp_steps: u64,
    pub update_every: u64,
}

impl SparsitySchedule {
    pub fn new(initial: f64, target: f64, start: u64, ramp_steps: u64, update_every: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&initial) || !(0.0..=1.0).contains(&target) || initial > target {
            return Err(Error::invalid(format!(
                "sparsity schedule needs 0 <= initial <= target <= 1, got {initial} and {target}"
            )));
        }
        if ramp_steps == 0 || update_every == 0 {
            return Err(Error::invalid("ramp_steps and update_every must be positive"));
        }
        Ok(SparsitySchedule {
            initial,
            target,
            start,
            ramp_steps,
            update_every,
        })
    }

    /// Fixed sparsity from step 0.
    pub fn constant(sparsity: f64) -> Result<Self> {
        Self::new(sparsity, sparsity, 0, 1, 1)
    }

    pub fn sparsity_at(&self, t: u64) -> f64 {
        if t < self.start {
            return self.initial;
        }
        let elapsed = t - self.start;
        if elapsed >= self.ramp_steps {
            return self.target;
        }
        let elapsed = elapsed - elapsed % self.update_every;
        let remaining = 1.0 - elapsed as f64 / self.ramp_steps as f64;
        // same cubic as above, arranged so that t = start returns `initial` exactly
        self.initial + (self.target - self.initial) * (1.0 - remaining.powi(3))
    }
}
