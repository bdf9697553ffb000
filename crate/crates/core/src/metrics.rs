//! Mask-dynamics instrumentation and record emission.
//!
//! All ratios are taken over prunable coordinates only; non-prunable
//! coordinates are kept by every mask and never flip.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::nn::ParamLayout;
use crate::pruning::Mask;

/// One evaluation point of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: u64,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    pub sparsity_target: f64,
    pub sparsity_achieved: f64,
    pub delta: f64,
    #[serde(rename = "flips")]
    pub flips_since_last: u64,
    pub iou: f64,
}

pub const CSV_HEADER: &str =
    "step,epoch,lr,train_loss,train_acc,test_loss,test_acc,sparsity_target,sparsity_achieved,delta,flips,iou";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Json,
}

/// Intersection over union of the kept prunable coordinates. Two empty
/// supports give 1.
pub fn mask_iou(a: &Mask, b: &Mask) -> Result<f64> {
    check_len(a.len(), b.len())?;
    let fixed = a.len() - a.n_prunable();
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    let (inter, union) = (inter - fixed, union - fixed);
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

pub fn flip_count(a: &Mask, b: &Mask) -> Result<usize> {
    check_len(a.len(), b.len())?;
    Ok(a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count())
}

/// Fraction of prunable coordinates whose bit differs.
pub fn flip_ratio(a: &Mask, b: &Mask) -> Result<f64> {
    let flips = flip_count(a, b)?;
    Ok(if a.n_prunable() == 0 {
        0.0
    } else {
        flips as f64 / a.n_prunable() as f64
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskEvent {
    pub step: u64,
    pub epoch: u64,
    pub mask: Mask,
}

/// Masks recorded at each mask-update event.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaskHistory {
    events: Vec<MaskEvent>,
    max_events: Option<usize>,
}

impl MaskHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps only the most recent `max_events` masks.
    pub fn with_retention(max_events: usize) -> Self {
        MaskHistory {
            events: Vec::new(),
            max_events: Some(max_events.max(1)),
        }
    }

    pub fn push(&mut self, step: u64, epoch: u64, mask: Mask) -> Result<()> {
        if let Some(last) = self.events.last() {
            if step <= last.step {
                return Err(Error::invalid(format!(
                    "mask event at step {step} does not follow step {}",
                    last.step
                )));
            }
            check_len(last.mask.len(), mask.len())?;
        }
        self.events.push(MaskEvent { step, epoch, mask });
        if let Some(max) = self.max_events {
            if self.events.len() > max {
                self.events.remove(0);
            }
        }
        Ok(())
    }

    pub fn events(&self) -> &[MaskEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last(&self) -> Option<&Mask> {
        self.events.last().map(|e| &e.mask)
    }

    /// `(step, flips vs previous event)` for every event after the first.
    pub fn flips_per_event(&self) -> Vec<(u64, usize)> {
        self.events
            .windows(2)
            .map(|w| (w[1].step, flip_count(&w[0].mask, &w[1].mask).unwrap_or(0)))
            .collect()
    }

    /// Number of coordinates pruned at some event and kept at a later one.
    pub fn reactivations(&self) -> usize {
        let Some(first) = self.events.first() else {
            return 0;
        };
        let mut ever_pruned = vec![false; first.mask.len()];
        let mut revived = vec![false; first.mask.len()];
        for e in &self.events {
            for (i, &b) in e.mask.bits().iter().enumerate() {
                if b && ever_pruned[i] {
                    revived[i] = true;
                }
                if !b {
                    ever_pruned[i] = true;
                }
            }
        }
        revived.iter().filter(|&&r| r).count()
    }

    const MAGIC: &'static [u8; 4] = b"DPFM";

    /// `DPFM`, version, length, event count, then per event step, epoch and
    /// the bit-packed mask. Little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.events.first().map_or(0, |e| e.mask.len());
        let mut out = Vec::new();
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(d as u64).to_le_bytes());
        out.extend_from_slice(&(self.events.len() as u64).to_le_bytes());
        for e in &self.events {
            out.extend_from_slice(&e.step.to_le_bytes());
            out.extend_from_slice(&e.epoch.to_le_bytes());
            out.extend_from_slice(&e.mask.to_packed());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], layout: &ParamLayout) -> Result<Self> {
        let mut r = crate::checkpoint::Reader::new(bytes);
        if r.take(4)? != Self::MAGIC {
            return Err(Error::Format("not a mask history file".into()));
        }
        let version = r.u32()?;
        if version != 1 {
            return Err(Error::Format(format!("unsupported mask history version {version}")));
        }
        let d = r.u64()? as usize;
        let count = r.u64()? as usize;
        let mut history = MaskHistory::new();
        if count > 0 {
            check_len(layout.len(), d)?;
        }
        for _ in 0..count {
            let step = r.u64()?;
            let epoch = r.u64()?;
            let mask = Mask::from_packed(r.take(d.div_ceil(8))?, layout)?;
            history.push(step, epoch, mask)?;
        }
        r.finish()?;
        Ok(history)
    }
}

/// For each epoch `e`, the fraction of prunable coordinates whose bit changes
/// at some mask update in an epoch strictly after `e`.
pub fn last_change_curve(history: &MaskHistory, epochs: usize) -> Vec<f64> {
    let events = history.events();
    let Some(first) = events.first() else {
        return vec![0.0; epochs];
    };
    let n_prunable = first.mask.n_prunable();
    let mut last_change: Vec<Option<u64>> = vec![None; first.mask.len()];
    for w in events.windows(2) {
        for (i, (a, b)) in w[0].mask.bits().iter().zip(w[1].mask.bits()).enumerate() {
            if a != b {
                last_change[i] = Some(w[1].epoch);
            }
        }
    }
    (0..epochs as u64)
        .map(|e| {
            if n_prunable == 0 {
                return 0.0;
            }
            let still = last_change.iter().filter(|c| matches!(c, Some(x) if *x > e)).count();
            still as f64 / n_prunable as f64
        })
        .collect()
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(records: &[StepRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.epoch,
            fmt_float(r.lr),
            fmt_float(r.train_loss),
            fmt_float(r.train_acc),
            fmt_float(r.test_loss),
            fmt_float(r.test_acc),
            fmt_float(r.sparsity_target),
            fmt_float(r.sparsity_achieved),
            fmt_float(r.delta),
            r.flips_since_last,
            fmt_float(r.iou),
        )?;
    }
    Ok(())
}

pub fn write_json<W: Write>(records: &[StepRecord], mut w: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut w, records)?;
    writeln!(w)
}

/// Writes records to `path` in the given format.
pub fn emit(records: &[StepRecord], path: &Path, format: RecordFormat) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        RecordFormat::Csv => write_csv(records, &mut buf),
        RecordFormat::Json => write_json(records, &mut buf),
    }
    .map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(bits: &[u8]) -> Mask {
        let layout = ParamLayout::flat(bits.len());
        Mask::from_bits(bits.iter().map(|&b| b == 1).collect(), &layout).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = mask(&[1, 1, 0, 0]);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &mask(&[0, 0, 1, 1])).unwrap(), 0.0);
        let x = mask(&[0, 1, 1, 0]);
        let y = mask(&[0, 0, 1, 1]);
        assert!((mask_iou(&x, &y).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mask_iou(&mask(&[0, 0]), &mask(&[0, 0])).unwrap(), 1.0);
        assert!(mask_iou(&x, &mask(&[1])).is_err());
    }

    #[test]
    fn iou_ignores_dense_coordinates() {
        let layout = ParamLayout::for_layers(&crate::nn::LayerSpec::chain(&[2, 1, 1]));
        // weights of layer 0 are the first two coordinates
        let a = Mask::from_bits(vec![true, false, true, true, true], &layout).unwrap();
        let b = Mask::from_bits(vec![false, true, true, true, true], &layout).unwrap();
        assert_eq!(mask_iou(&a, &b).unwrap(), 0.0);
        assert_eq!(flip_ratio(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn flip_ratio_examples() {
        let a = mask(&[1, 0, 1, 0, 1, 1, 0, 0]);
        assert_eq!(flip_ratio(&a, &a).unwrap(), 0.0);
        let comp = mask(&[0, 1, 0, 1, 0, 0, 1, 1]);
        assert_eq!(flip_ratio(&a, &comp).unwrap(), 1.0);
        let one = mask(&[1, 0, 1, 0, 1, 1, 0, 1]);
        assert_eq!(flip_ratio(&a, &one).unwrap(), 0.125);
    }

    #[test]
    fn constant_history_has_flat_curve() {
        let mut h = MaskHistory::new();
        for s in 0..5 {
            h.push(s * 10, s, mask(&[1, 0, 1, 0])).unwrap();
        }
        assert_eq!(last_change_curve(&h, 5), vec![0.0; 5]);
    }

    #[test]
    fn single_late_flip() {
        let mut h = MaskHistory::new();
        h.push(0, 0, mask(&[1, 0, 1, 0])).unwrap();
        h.push(10, 1, mask(&[1, 0, 1, 0])).unwrap();
        h.push(20, 3, mask(&[1, 0, 0, 1])).unwrap();
        assert_eq!(last_change_curve(&h, 4), vec![0.5, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn steps_must_increase() {
        let mut h = MaskHistory::new();
        h.push(5, 0, mask(&[1])).unwrap();
        assert!(h.push(5, 0, mask(&[1])).is_err());
    }

    #[test]
    fn retention_drops_oldest() {
        let mut h = MaskHistory::with_retention(2);
        for s in 0..4 {
            h.push(s, 0, mask(&[1, 1])).unwrap();
        }
        assert_eq!(h.events().iter().map(|e| e.step).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn reactivation_count() {
        let mut h = MaskHistory::new();
        h.push(0, 0, mask(&[1, 0, 1])).unwrap();
        h.push(1, 0, mask(&[1, 1, 0])).unwrap();
        h.push(2, 0, mask(&[1, 1, 0])).unwrap();
        assert_eq!(h.reactivations(), 1);
    }

    #[test]
    fn history_bytes_round_trip() {
        let mut h = MaskHistory::new();
        h.push(0, 0, mask(&[1, 0, 1])).unwrap();
        h.push(16, 1, mask(&[0, 1, 1])).unwrap();
        let back = MaskHistory::from_bytes(&h.to_bytes(), &ParamLayout::flat(3)).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_floats_round_trip() {
        let r = StepRecord {
            step: 3,
            epoch: 1,
            lr: 0.1,
            train_loss: 1.0 / 3.0,
            train_acc: 0.5,
            test_loss: std::f64::consts::PI,
            test_acc: 0.25,
            sparsity_target: 0.9,
            sparsity_achieved: 0.9,
            delta: 1e-300,
            flips_since_last: 7,
            iou: 2.0 / 3.0,
        };
        let mut buf = Vec::new();
        write_csv(std::slice::from_ref(&r), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[3].parse::<f64>().unwrap(), r.train_loss);
        assert_eq!(row[5].parse::<f64>().unwrap(), r.test_loss);
        assert_eq!(row[9].parse::<f64>().unwrap(), r.delta);
        assert_eq!(row[11].parse::<f64>().unwrap(), r.iou);

        let mut json = Vec::new();
        write_json(std::slice::from_ref(&r), &mut json).unwrap();
        let back: Vec<StepRecord> = serde_json::from_slice(&json).unwrap();
        assert_eq!(back, vec![r]);
    }
}
