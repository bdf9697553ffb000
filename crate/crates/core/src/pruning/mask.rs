use crate::error::{check_len, Error, Result};
use crate::nn::ParamLayout;

/// Binary mask aligned with a parameter vector. Non-prunable coordinates are
/// always kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    bits: Vec<bool>,
    n_prunable: usize,
    n_pruned: usize,
}

impl Mask {
    pub fn ones(layout: &ParamLayout) -> Self {
        Mask {
            bits: vec![true; layout.len()],
            n_prunable: layout.n_prunable(),
            n_pruned: 0,
        }
    }

    pub fn from_bits(bits: Vec<bool>, layout: &ParamLayout) -> Result<Self> {
        check_len(layout.len(), bits.len())?;
        let mut n_pruned = 0;
        for (i, (&b, &p)) in bits.iter().zip(layout.prunable()).enumerate() {
            if !b {
                if !p {
                    return Err(Error::invalid(format!(
                        "mask prunes non-prunable coordinate {i}"
                    )));
                }
                n_pruned += 1;
            }
        }
        Ok(Mask {
            bits,
            n_prunable: layout.n_prunable(),
            n_pruned,
        })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn n_prunable(&self) -> usize {
        self.n_prunable
    }

    pub fn n_pruned(&self) -> usize {
        self.n_pruned
    }

    /// Number of kept coordinates (prunable or not).
    pub fn support_len(&self) -> usize {
        self.bits.len() - self.n_pruned
    }

    /// Fraction of prunable coordinates that are pruned; 0 when nothing is prunable.
    pub fn sparsity(&self) -> f64 {
        if self.n_prunable == 0 {
            0.0
        } else {
            self.n_pruned as f64 / self.n_prunable as f64
        }
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// Elementwise AND.
    pub fn intersect(&self, other: &Mask) -> Result<Mask> {
        check_len(self.len(), other.len())?;
        let bits: Vec<bool> = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect();
        let n_pruned = bits.iter().filter(|&&b| !b).count();
        Ok(Mask {
            bits,
            n_prunable: self.n_prunable,
            n_pruned,
        })
    }

    /// Bit-packed, least significant bit first.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn from_packed(bytes: &[u8], layout: &ParamLayout) -> Result<Mask> {
        check_len(layout.len().div_ceil(8), bytes.len())?;
        let bits = (0..layout.len())
            .map(|i| bytes[i / 8] >> (i % 8) & 1 == 1)
            .collect();
        Mask::from_bits(bits, layout)
    }
}

/// `m ⊙ x`; pruned coordinates become `+0.0`.
pub fn apply_mask(params: &[f64], mask: &Mask) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.len()];
    apply_mask_into(params, mask, &mut out)?;
    Ok(out)
}

pub fn apply_mask_into(params: &[f64], mask: &Mask, out: &mut [f64]) -> Result<()> {
    check_len(mask.len(), params.len())?;
    check_len(params.len(), out.len())?;
    for ((o, &x), &b) in out.iter_mut().zip(params).zip(&mask.bits) {
        *o = if b { x } else { 0.0 };
    }
    Ok(())
}

/// Pruning quality `||x - x_hat||^2 / ||x||^2`; zero when `x` is zero.
pub fn delta_of(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    check_len(x.len(), x_hat.len())?;
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    if norm_sq == 0.0 {
        log::debug!("delta_of called with a zero vector; returning 0");
        return Ok(0.0);
    }
    let err_sq: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(err_sq / norm_sq)
}
