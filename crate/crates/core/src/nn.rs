//! Minimal deterministic feed-forward network engine.
//!
//! A model is a chain of dense layers `a_{l+1} = act(W_l a_l + b_l)` followed by a
//! softmax cross-entropy loss averaged over the batch. All parameters live in a
//! single flat `Vec<f64>`; the [`ParamLayout`] describes how that vector is cut
//! into per-layer weight matrices (row-major, `out_dim x in_dim`) and bias
//! vectors, and which coordinates may be pruned.
//!
//! Forward and backward take the parameter vector explicitly so callers can
//! evaluate the model at a pruned point `m ⊙ x` while keeping the dense weights
//! elsewhere.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Shape and pruning policy of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub prunable_weights: bool,
    #[serde(default)]
    pub prunable_bias: bool,
}

impl LayerSpec {
    /// ReLU layer whose weight matrix may be pruned; bias stays dense.
    pub fn hidden(in_dim: usize, out_dim: usize) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation: Activation::Relu,
            prunable_weights: true,
            prunable_bias: false,
        }
    }

    /// Final classifier layer: identity activation, never pruned.
    pub fn output(in_dim: usize, out_dim: usize) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation: Activation::Identity,
            prunable_weights: false,
            prunable_bias: false,
        }
    }

    /// Builds `[d_0 -> d_1 -> ... -> d_k]` with ReLU hidden layers and a dense
    /// output layer.
    pub fn chain(dims: &[usize]) -> Vec<LayerSpec> {
        let n = dims.len().saturating_sub(1);
        (0..n)
            .map(|l| {
                if l + 1 == n {
                    LayerSpec::output(dims[l], dims[l + 1])
                } else {
                    LayerSpec::hidden(dims[l], dims[l + 1])
                }
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Weights,
    Bias,
}

/// A contiguous block of the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub layer: usize,
    pub kind: SegmentKind,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub prunable: bool,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }

    /// Index range of row `r` (one output neuron for a weight matrix).
    pub fn row(&self, r: usize) -> Range<usize> {
        let start = self.offset + r * self.cols;
        start..start + self.cols
    }
}

/// Partition of a flat parameter vector into segments, with per-coordinate
/// prunability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    segments: Vec<Segment>,
    prunable: Vec<bool>,
    n_prunable: usize,
}

impl ParamLayout {
    /// A single prunable segment of length `d`; used for plain vectors.
    pub fn flat(d: usize) -> Self {
        Self::from_segments(vec![Segment {
            layer: 0,
            kind: SegmentKind::Weights,
            offset: 0,
            rows: 1,
            cols: d,
            prunable: true,
        }])
    }

    /// Weight matrix then bias, per layer, in order.
    pub fn for_layers(specs: &[LayerSpec]) -> Self {
        let mut segments = Vec::with_capacity(2 * specs.len());
        let mut offset = 0;
        for (layer, s) in specs.iter().enumerate() {
            segments.push(Segment {
                layer,
                kind: SegmentKind::Weights,
                offset,
                rows: s.out_dim,
                cols: s.in_dim,
                prunable: s.prunable_weights,
            });
            offset += s.out_dim * s.in_dim;
            segments.push(Segment {
                layer,
                kind: SegmentKind::Bias,
                offset,
                rows: 1,
                cols: s.out_dim,
                prunable: s.prunable_bias,
            });
            offset += s.out_dim;
        }
        Self::from_segments(segments)
    }

    fn from_segments(segments: Vec<Segment>) -> Self {
        let mut prunable = Vec::new();
        for s in &segments {
            debug_assert_eq!(s.offset, prunable.len());
            prunable.extend(std::iter::repeat_n(s.prunable, s.len()));
        }
        let n_prunable = prunable.iter().filter(|&&p| p).count();
        ParamLayout {
            segments,
            prunable,
            n_prunable,
        }
    }

    pub fn len(&self) -> usize {
        self.prunable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prunable.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn prunable(&self) -> &[bool] {
        &self.prunable
    }

    pub fn is_prunable(&self, i: usize) -> bool {
        self.prunable[i]
    }

    pub fn n_prunable(&self) -> usize {
        self.n_prunable
    }

    pub fn prunable_segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.prunable && !s.is_empty())
    }

    fn segment(&self, layer: usize, kind: SegmentKind) -> &Segment {
        self.segments
            .iter()
            .find(|s| s.layer == layer && s.kind == kind)
            .expect("layer out of range")
    }

    pub fn weights(&self, layer: usize) -> &Segment {
        self.segment(layer, SegmentKind::Weights)
    }

    pub fn bias(&self, layer: usize) -> &Segment {
        self.segment(layer, SegmentKind::Bias)
    }

    /// Splits `params` into one slice per segment.
    pub fn split<'a>(&self, params: &'a [f64]) -> Result<Vec<&'a [f64]>> {
        check_len(self.len(), params.len())?;
        Ok(self.segments.iter().map(|s| &params[s.range()]).collect())
    }

    /// Inverse of [`ParamLayout::split`].
    pub fn flatten(&self, parts: &[&[f64]]) -> Result<Vec<f64>> {
        check_len(self.segments.len(), parts.len())?;
        let mut out = Vec::with_capacity(self.len());
        for (s, p) in self.segments.iter().zip(parts) {
            check_len(s.len(), p.len())?;
            out.extend_from_slice(p);
        }
        Ok(out)
    }
}

/// A mini-batch: row-major inputs `[batch_size x dim]` and class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    inputs: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
}

impl Batch {
    pub fn new(inputs: Vec<f64>, labels: Vec<usize>, dim: usize) -> Result<Self> {
        if labels.is_empty() || dim == 0 {
            return Err(Error::EmptyDataset);
        }
        check_len(labels.len() * dim, inputs.len())?;
        Ok(Batch {
            inputs,
            labels,
            dim,
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

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }
}

/// Activations saved by [`Mlp::forward`] for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    /// `inputs[l]` is the input of layer `l`; the last entry is the network output.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl ForwardCache {
    /// Softmax probabilities, row-major `[batch_size x num_classes]`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Network outputs before the softmax.
    pub fn logits(&self) -> &[f64] {
        self.inputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn fingerprint(params: &[f64], batch: &Batch) -> u64 {
    let mut h = DefaultHasher::new();
    for v in params.iter().chain(batch.inputs.iter()) {
        v.to_bits().hash(&mut h);
    }
    batch.labels.hash(&mut h);
    h.finish()
}

/// Evaluation summary over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

/// A feed-forward network: layer specs plus dense parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    specs: Vec<LayerSpec>,
    layout: ParamLayout,
    params: Vec<f64>,
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::invalid("model needs at least one layer"));
    }
    for (l, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::invalid(format!("layer {l} has a zero dimension")));
        }
        if l > 0 && specs[l - 1].out_dim != s.in_dim {
            return Err(Error::DimensionMismatch {
                layer: l,
                expected: specs[l - 1].out_dim,
                found: s.in_dim,
            });
        }
    }
    Ok(())
}

/// Glorot-uniform weights and zero biases, reproducible from `seed`.
pub fn init_model(specs: &[LayerSpec], seed: u64) -> Result<Mlp> {
    Mlp::new(specs.to_vec(), seed)
}

impl Mlp {
    pub fn new(specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        validate_specs(&specs)?;
        let layout = ParamLayout::for_layers(&specs);
        let mut params = vec![0.0; layout.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (l, s) in specs.iter().enumerate() {
            let limit = (6.0 / (s.in_dim + s.out_dim) as f64).sqrt();
            for w in &mut params[layout.weights(l).range()] {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(Mlp {
            specs,
            layout,
            params,
        })
    }

    pub fn from_params(specs: Vec<LayerSpec>, params: Vec<f64>) -> Result<Self> {
        validate_specs(&specs)?;
        let layout = ParamLayout::for_layers(&specs);
        check_len(layout.len(), params.len())?;
        Ok(Mlp {
            specs,
            layout,
            params,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        check_len(self.layout.len(), params.len())?;
        self.params = params;
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.specs[0].in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.specs[self.specs.len() - 1].out_dim
    }

    fn check_inputs(&self, params: &[f64], batch: &Batch) -> Result<()> {
        check_len(self.layout.len(), params.len())?;
        if batch.dim() != self.input_dim() {
            return Err(Error::invalid(format!(
                "batch dimension {} does not match model input {}",
                batch.dim(),
                self.input_dim()
            )));
        }
        let classes = self.num_classes();
        if let Some(&bad) = batch.labels().iter().find(|&&y| y >= classes) {
            return Err(Error::invalid(format!(
                "label {bad} outside [0, {classes})"
            )));
        }
        Ok(())
    }

    /// Mean softmax cross-entropy of the batch at `params`.
    pub fn forward(&self, params: &[f64], batch: &Batch) -> Result<(f64, ForwardCache)> {
        self.check_inputs(params, batch)?;
        let n = batch.len();
        let mut inputs = Vec::with_capacity(self.specs.len() + 1);
        let mut pre = Vec::with_capacity(self.specs.len());
        inputs.push(batch.inputs().to_vec());
        for (l, spec) in self.specs.iter().enumerate() {
            let w = &params[self.layout.weights(l).range()];
            let b = &params[self.layout.bias(l).range()];
            let x = inputs.last().expect("non-empty");
            let (din, dout) = (spec.in_dim, spec.out_dim);
            let mut z = vec![0.0; n * dout];
            for s in 0..n {
                let xs = &x[s * din..(s + 1) * din];
                for o in 0..dout {
                    let row = &w[o * din..(o + 1) * din];
                    let dot: f64 = row.iter().zip(xs).map(|(a, b)| a * b).sum();
                    z[s * dout + o] = b[o] + dot;
                }
            }
            let a: Vec<f64> = z.iter().map(|&v| spec.activation.apply(v)).collect();
            pre.push(z);
            inputs.push(a);
        }

        let classes = self.num_classes();
        let logits = inputs.last().expect("non-empty");
        let mut probs = vec![0.0; n * classes];
        let mut total = 0.0;
        for (s, &y) in batch.labels().iter().enumerate() {
            let zs = &logits[s * classes..(s + 1) * classes];
            let m = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = zs.iter().map(|&v| (v - m).exp()).sum();
            let lse = m + sum.ln();
            total += lse - zs[y];
            for c in 0..classes {
                probs[s * classes + c] = (zs[c] - lse).exp();
            }
        }
        let loss = total / n as f64;
        if !loss.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite loss {loss}")));
        }
        let cache = ForwardCache {
            fingerprint: fingerprint(params, batch),
            inputs,
            pre,
            probs,
        };
        Ok((loss, cache))
    }

    /// Exact gradient of the batch loss with respect to `params`, for all
    /// coordinates (masked coordinates included).
    pub fn backward(&self, params: &[f64], batch: &Batch, cache: &ForwardCache) -> Result<Vec<f64>> {
        self.check_inputs(params, batch)?;
        if cache.fingerprint != fingerprint(params, batch) {
            return Err(Error::StaleCache);
        }
        let n = batch.len();
        let inv_n = 1.0 / n as f64;
        let classes = self.num_classes();
        let mut grad = vec![0.0; self.layout.len()];

        // d loss / d output
        let mut upstream = cache.probs.clone();
        for (s, &y) in batch.labels().iter().enumerate() {
            upstream[s * classes + y] -= 1.0;
        }
        for v in &mut upstream {
            *v *= inv_n;
        }

        for l in (0..self.specs.len()).rev() {
            let spec = &self.specs[l];
            let (din, dout) = (spec.in_dim, spec.out_dim);
            let z = &cache.pre[l];
            let x = &cache.inputs[l];
            let dz: Vec<f64> = upstream
                .iter()
                .zip(z)
                .map(|(&g, &zv)| g * spec.activation.derivative(zv))
                .collect();

            let ws = self.layout.weights(l);
            let bs = self.layout.bias(l);
            {
                let gw = &mut grad[ws.range()];
                for s in 0..n {
                    let xs = &x[s * din..(s + 1) * din];
                    for o in 0..dout {
                        let d = dz[s * dout + o];
                        if d != 0.0 {
                            for (g, &xi) in gw[o * din..(o + 1) * din].iter_mut().zip(xs) {
                                *g += d * xi;
                            }
                        }
                    }
                }
            }
            {
                let gb = &mut grad[bs.range()];
                for s in 0..n {
                    for o in 0..dout {
                        gb[o] += dz[s * dout + o];
                    }
                }
            }
            if l > 0 {
                let w = &params[ws.range()];
                let mut down = vec![0.0; n * din];
                for s in 0..n {
                    let ds = &mut down[s * din..(s + 1) * din];
                    for o in 0..dout {
                        let d = dz[s * dout + o];
                        if d != 0.0 {
                            for (acc, &wv) in ds.iter_mut().zip(&w[o * din..(o + 1) * din]) {
                                *acc += wv * d;
                            }
                        }
                    }
                }
                upstream = down;
            }
        }
        Ok(grad)
    }

    pub fn loss(&self, params: &[f64], batch: &Batch) -> Result<f64> {
        self.forward(params, batch).map(|(loss, _)| loss)
    }

    pub fn loss_and_grad(&self, params: &[f64], batch: &Batch) -> Result<(f64, Vec<f64>)> {
        let (loss, cache) = self.forward(params, batch)?;
        let grad = self.backward(params, batch, &cache)?;
        Ok((loss, grad))
    }

    /// Central-difference gradient estimate of the batch loss.
    pub fn finite_diff_grad(&self, params: &[f64], batch: &Batch, h: f64) -> Result<Vec<f64>> {
        self.check_inputs(params, batch)?;
        let mut failure = None;
        let grad = central_difference(
            |p| match self.loss(p, batch) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            params,
            h,
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(grad),
        }
    }

    /// Mean loss and top-1 accuracy over a dataset. Ties in the argmax go to the
    /// lowest class index.
    pub fn evaluate(&self, params: &[f64], data: &Dataset) -> Result<Evaluation> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        const CHUNK: usize = 512;
        let classes = self.num_classes();
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let idx: Vec<usize> = (0..data.len()).collect();
        for chunk in idx.chunks(CHUNK) {
            let batch = data.batch(chunk);
            let (loss, cache) = self.forward(params, &batch)?;
            loss_sum += loss * chunk.len() as f64;
            let logits = cache.logits();
            for (s, &y) in batch.labels().iter().enumerate() {
                if argmax(&logits[s * classes..(s + 1) * classes]) == y {
                    correct += 1;
                }
            }
        }
        Ok(Evaluation {
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        })
    }
}

/// Index of the largest value; the first one wins on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Coordinate-wise central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn central_difference<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut p = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = f(&p);
        p[i] = orig - h;
        let down = f(&p);
        p[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}
