//! Masks, saliency criteria, sparsity schedules and compressors.

mod compress;
mod criteria;
mod mask;
mod schedule;

pub use compress::{compress, scaled_sign, Compressed, Compressor};
pub use criteria::{
    magnitude_mask, mask_from_scores, row_group_l2, snip_from_gradient, snip_mask, PruneScope,
};
pub use mask::{apply_mask, apply_mask_into, delta_of, Mask};
pub use schedule::SparsitySchedule;

/// Number of coordinates to prune out of `n` at sparsity `s`.
pub(crate) fn prune_count(s: f64, n: usize) -> usize {
    ((s * n as f64).round() as usize).min(n)
}
