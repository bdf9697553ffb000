//! Datasets: synthetic generators and an IDX (MNIST-style) reader.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::nn::Batch;

/// Labelled samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<f64>, labels: Vec<usize>, dim: usize, num_classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset dimension must be positive"));
        }
        check_len(labels.len() * dim, inputs.len())?;
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        Ok(Dataset {
            inputs,
            labels,
            dim,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    /// Gathers the given rows into a batch.
    ///
    /// Panics if `indices` is empty.
    pub fn batch(&self, indices: &[usize]) -> Batch {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Batch::new(inputs, labels, self.dim).expect("batch indices must be non-empty")
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            inputs,
            labels,
            dim: self.dim,
            num_classes: self.num_classes,
        }
    }
}

/// Train/test pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: Dataset,
    pub test: Dataset,
}

impl DataSplit {
    /// Shuffles deterministically and keeps the first 80% for training.
    fn from_shuffled(all: Dataset, rng: &mut ChaCha8Rng) -> Result<Self> {
        if all.len() < 2 {
            return Err(Error::invalid("need at least two samples to split"));
        }
        let mut order: Vec<usize> = (0..all.len()).collect();
        order.shuffle(rng);
        let n_train = ((all.len() as f64) * 0.8).round() as usize;
        let n_train = n_train.clamp(1, all.len() - 1);
        Ok(DataSplit {
            train: all.subset(&order[..n_train]),
            test: all.subset(&order[n_train..]),
        })
    }
}

/// Class centres with unit pairwise spacing: the scaled simplex `e_j / sqrt(2)`
/// when `k <= d`, otherwise points one unit apart along the first axis.
pub fn blob_means(k: usize, d: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| {
            let mut m = vec![0.0; d];
            if k <= d {
                m[j] = std::f64::consts::FRAC_1_SQRT_2;
            } else {
                m[0] = j as f64;
            }
            m
        })
        .collect()
}

/// `k` isotropic Gaussian clusters in `d` dimensions, `n` samples in total,
/// classes balanced within one, 80/20 train/test split.
pub fn make_blobs(k: usize, d: usize, n: usize, noise: f64, seed: u64) -> Result<DataSplit> {
    if k < 2 {
        return Err(Error::invalid("blobs need at least two classes"));
    }
    if d == 0 || !(noise >= 0.0) {
        return Err(Error::invalid("blobs need d >= 1 and noise >= 0"));
    }
    let means = blob_means(k, d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % k;
        for &mu in &means[y] {
            let z: f64 = StandardNormal.sample(&mut rng);
            inputs.push(mu + noise * z);
        }
        labels.push(y);
    }
    let all = Dataset::new(inputs, labels, d, k)?;
    DataSplit::from_shuffled(all, &mut rng)
}

/// `k` interleaved spiral arms in the plane.
pub fn make_spirals(k: usize, n: usize, noise: f64, seed: u64) -> Result<DataSplit> {
    if k < 2 {
        return Err(Error::invalid("spirals need at least two classes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_class = n.div_ceil(k).max(1);
    let mut inputs = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % k;
        let step = (i / k) as f64 / per_class as f64;
        let r = 0.1 + 0.9 * step;
        let theta = std::f64::consts::TAU * y as f64 / k as f64 + 3.0 * std::f64::consts::PI * step;
        let zx: f64 = StandardNormal.sample(&mut rng);
        let zy: f64 = StandardNormal.sample(&mut rng);
        inputs.push(r * theta.cos() + noise * zx);
        inputs.push(r * theta.sin() + noise * zy);
        labels.push(y);
    }
    let all = Dataset::new(inputs, labels, 2, k)?;
    DataSplit::from_shuffled(all, &mut rng)
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format("truncated IDX header".into()))
}

/// Images from an IDX3 file: `(count, rows * cols, pixels scaled to [0, 1])`.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx_images(&bytes)
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES {
        return Err(Error::Format(format!("bad IDX image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let pixels = &bytes[16..];
    if pixels.len() != n * rows * cols {
        return Err(Error::Format(format!(
            "IDX image payload has {} bytes, header says {}",
            pixels.len(),
            n * rows * cols
        )));
    }
    Ok((n, rows * cols, pixels.iter().map(|&p| p as f64 / 255.0).collect()))
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx_labels(&bytes)
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS {
        return Err(Error::Format(format!("bad IDX label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let labels = &bytes[8..];
    if labels.len() != n {
        return Err(Error::Format(format!(
            "IDX label payload has {} bytes, header says {n}",
            labels.len()
        )));
    }
    Ok(labels.to_vec())
}

/// Pairs an IDX image file with its label file.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>, num_classes: usize) -> Result<Dataset> {
    let (n, dim, pixels) = read_idx_images(images)?;
    let labels = read_idx_labels(labels)?;
    check_len(n, labels.len())?;
    Dataset::new(pixels, labels.into_iter().map(usize::from).collect(), dim, num_classes)
}

/// Encodes images as IDX3 (`rows x cols` each, one byte per pixel).
pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let n = pixels.len() / (rows * cols).max(1);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nearest_mean_accuracy(data: &Dataset, means: &[Vec<f64>]) -> f64 {
        let mut correct = 0;
        for i in 0..data.len() {
            let x = data.row(i);
            let dists: Vec<f64> = means
                .iter()
                .map(|m| -m.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .collect();
            if crate::nn::argmax(&dists) == data.labels()[i] {
                correct += 1;
            }
        }
        correct as f64 / data.len() as f64
    }

    #[test]
    fn noiseless_blobs_are_separable() {
        let split = make_blobs(4, 6, 200, 0.0, 3).unwrap();
        let means = blob_means(4, 6);
        assert_eq!(nearest_mean_accuracy(&split.train, &means), 1.0);
        assert_eq!(nearest_mean_accuracy(&split.test, &means), 1.0);
    }

    #[test]
    fn blob_classes_are_balanced() {
        let split = make_blobs(3, 5, 301, 0.5, 9).unwrap();
        let mut counts = split.train.class_counts();
        for (c, t) in counts.iter_mut().zip(split.test.class_counts()) {
            *c += t;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1);
        assert_eq!(split.train.len(), 241);
        assert_eq!(split.test.len(), 60);
    }

    #[test]
    fn blobs_are_reproducible() {
        let a = make_blobs(4, 20, 100, 0.3, 42).unwrap();
        let b = make_blobs(4, 20, 100, 0.3, 42).unwrap();
        let bits = |d: &Dataset| d.inputs().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.train), bits(&b.train));
        assert_eq!(a.train.labels(), b.train.labels());
        assert_ne!(a, make_blobs(4, 20, 100, 0.3, 43).unwrap());
    }

    #[test]
    fn blob_means_are_unit_spaced() {
        for (k, d) in [(4, 20), (5, 2)] {
            let m = blob_means(k, d);
            for i in 0..k {
                for j in 0..i {
                    let dist: f64 = m[i].iter().zip(&m[j]).map(|(a, b)| (a - b).powi(2)).sum();
                    if k <= d {
                        assert!((dist.sqrt() - 1.0).abs() < 1e-12);
                    } else {
                        assert!((dist.sqrt() - (i - j) as f64).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn idx_round_trip() {
        let pixels: Vec<u8> = (0..2 * 3 * 2).map(|i| (i * 20) as u8).collect();
        let (n, dim, values) = parse_idx_images(&encode_idx_images(3, 2, &pixels)).unwrap();
        assert_eq!((n, dim), (2, 6));
        assert_eq!(values[1], 20.0 / 255.0);
        assert_eq!(parse_idx_labels(&encode_idx_labels(&[3, 1])).unwrap(), vec![3, 1]);
    }

    #[test]
    fn idx_rejects_wrong_magic() {
        let mut bytes = encode_idx_labels(&[1, 2]);
        bytes[3] = 0x03;
        assert!(parse_idx_labels(&bytes).is_err());
        assert!(parse_idx_images(&encode_idx_labels(&[1])).is_err());
    }

    #[test]
    fn spirals_shape() {
        let s = make_spirals(3, 90, 0.01, 1).unwrap();
        assert_eq!(s.train.dim(), 2);
        assert_eq!(s.train.len() + s.test.len(), 90);
    }
}
