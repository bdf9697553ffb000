//! Binary training checkpoints.
//!
//! Layout (little-endian): `DPFC`, `u32` version, layer specs, `u64` length
//! `d`, `d` dense parameters, bit-packed mask (LSB first), `d` momentum
//! entries, step counter, rng state `(seed, epoch)`, training phase, current
//! mask target and the running gradient-norm maximum.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Activation, LayerSpec, ParamLayout};
use crate::pruning::Mask;
use crate::train::Phase;

const MAGIC: &[u8; 4] = b"DPFC";
pub const VERSION: u32 = 1;

/// Per-epoch shuffles are derived from `(seed, epoch)`, so this pair is the
/// whole sampler state at an epoch boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub specs: Vec<LayerSpec>,
    pub params: Vec<f64>,
    pub mask: Mask,
    pub momentum: Vec<f64>,
    pub step: u64,
    pub rng: RngState,
    pub phase: Phase,
    pub mask_target: f64,
    pub max_grad_norm: f64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.params.len();
        let mut out = Vec::with_capacity(64 + 16 * d + d / 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.specs.len() as u32).to_le_bytes());
        for s in &self.specs {
            out.extend_from_slice(&(s.in_dim as u32).to_le_bytes());
            out.extend_from_slice(&(s.out_dim as u32).to_le_bytes());
            out.push(match s.activation {
                Activation::Relu => 0,
                Activation::Identity => 1,
            });
            out.push(s.prunable_weights as u8);
            out.push(s.prunable_bias as u8);
        }
        out.extend_from_slice(&(d as u64).to_le_bytes());
        for v in &self.params {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.mask.to_packed());
        for v in &self.momentum {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.rng.seed.to_le_bytes());
        out.extend_from_slice(&self.rng.epoch.to_le_bytes());
        out.push(self.phase as u8);
        out.extend_from_slice(&self.mask_target.to_le_bytes());
        out.extend_from_slice(&self.max_grad_norm.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let n_layers = r.u32()? as usize;
        let mut specs = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let in_dim = r.u32()? as usize;
            let out_dim = r.u32()? as usize;
            let activation = match r.u8()? {
                0 => Activation::Relu,
                1 => Activation::Identity,
                other => return Err(Error::Format(format!("unknown activation tag {other}"))),
            };
            specs.push(LayerSpec {
                in_dim,
                out_dim,
                activation,
                prunable_weights: r.u8()? != 0,
                prunable_bias: r.u8()? != 0,
            });
        }
        let layout = ParamLayout::for_layers(&specs);
        let d = r.u64()? as usize;
        if d != layout.len() {
            return Err(Error::Format(format!(
                "checkpoint holds {d} parameters, layer specs need {}",
                layout.len()
            )));
        }
        let params = r.f64_vec(d)?;
        let mask = Mask::from_packed(r.take(d.div_ceil(8))?, &layout)?;
        let momentum = r.f64_vec(d)?;
        let step = r.u64()?;
        let rng = RngState {
            seed: r.u64()?,
            epoch: r.u64()?,
        };
        let phase = Phase::from_tag(r.u8()?)?;
        let mask_target = r.f64()?;
        let max_grad_norm = r.f64()?;
        r.finish()?;
        Ok(Checkpoint {
            specs,
            params,
            mask,
            momentum,
            step,
            rng,
            phase,
            mask_target,
            max_grad_norm,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::for_layers(&self.specs)
    }
}

/// Cursor over a little-endian byte buffer.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Format("unexpected end of file".into())),
        }
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub(crate) fn finish(self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )))
        }
    }
}
