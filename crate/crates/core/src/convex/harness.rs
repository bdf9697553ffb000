use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::nn::ParamLayout;
use crate::pruning::{apply_mask_into, magnitude_mask, scaled_sign, Mask, PruneScope};

use super::double_well::DoubleWell;
use super::quadratic::{dot, QuadraticProblem};
use super::sampler::{sample_iterate_thm1, sample_uniform, thm1_weight};

const NOISE_STREAM: u64 = 0;
const SAMPLER_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const PILOT_STREAM: u64 = 3;

/// How the lab turns the dense iterate into the evaluated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ConvexCompressor {
    /// Global magnitude mask, recomputed every `period` steps.
    Magnitude { sparsity: f64 },
    /// A mask that never changes (`true` keeps the coordinate).
    Fixed { keep: Vec<bool> },
    /// `‖x‖₁/d · sign(x)`, recomputed every step.
    ScaledSign,
}

impl ConvexCompressor {
    pub fn dense() -> Self {
        ConvexCompressor::Magnitude { sparsity: 0.0 }
    }

    pub fn sparsity(&self) -> f64 {
        match self {
            ConvexCompressor::Magnitude { sparsity } => *sparsity,
            ConvexCompressor::Fixed { keep } => {
                keep.iter().filter(|k| !**k).count() as f64 / keep.len().max(1) as f64
            }
            ConvexCompressor::ScaledSign => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabOptions {
    /// Steps between mask recomputations.
    pub period: u64,
    /// Euclidean ball (centred at the origin) the dense iterate is projected
    /// onto after every step.
    pub projection_radius: Option<f64>,
    /// Approximate number of trace rows kept per run.
    pub trace_points: usize,
}

impl Default for LabOptions {
    fn default() -> Self {
        LabOptions {
            period: 16,
            projection_radius: None,
            trace_points: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: u64,
    /// Suboptimality or squared gradient norm at the compressed iterate.
    pub value: f64,
    pub delta: f64,
    pub x_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremRunResult {
    pub horizon: u64,
    pub seed: u64,
    pub sparsity: f64,
    /// The reported quantity: the sampled suboptimality for the strongly
    /// convex harness, the uniform mean of `‖∇f(x̂_t)‖²` for the nonconvex one.
    pub result: f64,
    pub sampled_index: u64,
    pub sampled_iterate_value: f64,
    /// Expectation of the value under the sampling law.
    pub expected_value: f64,
    /// Mean over `t` of `δ_t ‖x_t‖² = ‖x_t − x̂_t‖²`.
    pub avg_pruning_term: f64,
    pub mean_delta: f64,
    /// Value at the last iterate `x̂_T`.
    pub final_value: f64,
    pub diverged: bool,
    /// Largest stochastic gradient norm seen.
    pub gradient_bound: f64,
    pub f_star: f64,
    pub step_constant: Option<f64>,
    pub trace: Vec<TracePoint>,
}

/// Internal per-run compression state.
struct Compression<'a> {
    policy: &'a ConvexCompressor,
    layout: ParamLayout,
    mask: Mask,
    period: u64,
}

impl<'a> Compression<'a> {
    fn new(policy: &'a ConvexCompressor, d: usize, period: u64) -> Result<Self> {
        if period == 0 {
            return Err(Error::invalid("mask period must be positive"));
        }
        let layout = ParamLayout::flat(d);
        let mask = match policy {
            ConvexCompressor::Fixed { keep } => {
                check_len(d, keep.len())?;
                Mask::from_bits(keep.clone(), &layout)?
            }
            ConvexCompressor::Magnitude { sparsity } if !(0.0..=1.0).contains(sparsity) => {
                return Err(Error::invalid(format!("sparsity {sparsity} outside [0, 1]")));
            }
            _ => Mask::ones(&layout),
        };
        Ok(Compression {
            policy,
            layout,
            mask,
            period,
        })
    }

    fn apply(&mut self, t: u64, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self.policy {
            ConvexCompressor::Magnitude { sparsity } => {
                if *sparsity > 0.0 && t % self.period == 0 {
                    self.mask = magnitude_mask(x, &self.layout, *sparsity, PruneScope::Global)?;
                }
                apply_mask_into(x, &self.mask, out)
            }
            ConvexCompressor::Fixed { .. } => apply_mask_into(x, &self.mask, out),
            ConvexCompressor::ScaledSign => {
                out.copy_from_slice(&scaled_sign(x, &self.layout)?);
                Ok(())
            }
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn add_noise(g: &mut [f64], sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma > 0.0 {
        for g in g {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            *g += sigma * z;
        }
    }
}

fn project(x: &mut [f64], radius: Option<f64>) {
    if let Some(r) = radius {
        let n = dot(x, x).sqrt();
        if n > r {
            let s = r / n;
            x.iter_mut().for_each(|v| *v *= s);
        }
    }
}

fn trace_stride(horizon: u64, points: usize) -> u64 {
    (horizon / points.max(1) as u64).max(1)
}

fn pruning_term(x: &[f64], x_hat: &[f64]) -> (f64, f64) {
    let err: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    let norm = dot(x, x);
    let delta = if norm > 0.0 { err / norm } else { 0.0 };
    (err, delta)
}

/// Result of a quadratic run plus the final dense iterate.
struct QuadraticRun {
    result: TheoremRunResult,
    x_final: Vec<f64>,
}

fn run_quadratic(
    problem: &QuadraticProblem,
    compressor: &ConvexCompressor,
    horizon: u64,
    seed: u64,
    opts: &LabOptions,
) -> Result<QuadraticRun> {
    let d = problem.dim();
    let mu = problem.mu();
    let sigma = problem.noise_sigma();
    let mut comp = Compression::new(compressor, d, opts.period)?;
    let mut noise = stream(seed, NOISE_STREAM);
    let mut sampler = stream(seed, SAMPLER_STREAM);
    let tau = sample_iterate_thm1(horizon, &mut sampler);
    let stride = trace_stride(horizon, opts.trace_points);

    let mut x = vec![0.0; d];
    let mut x_hat = vec![0.0; d];
    let mut u = vec![0.0; d];
    let (mut sampled, mut expected, mut pterm, mut dsum) = (f64::NAN, 0.0, 0.0, 0.0);
    let (mut sub0, mut last, mut gmax) = (0.0, 0.0, 0.0f64);
    let mut diverged = false;
    let mut trace = Vec::new();
    let mut steps_seen = 0u64;

    for t in 0..=horizon {
        comp.apply(t, &x, &mut x_hat)?;
        for ((u, xh), s) in u.iter_mut().zip(&x_hat).zip(problem.x_star()) {
            *u = xh - s;
        }
        let mut g = problem.matvec(&u);
        let sub = 0.5 * dot(&u, &g);
        let (err, delta) = pruning_term(&x, &x_hat);
        if t == 0 {
            sub0 = sub;
        }
        steps_seen += 1;
        expected += thm1_weight(t, horizon) * sub;
        pterm += err;
        dsum += delta;
        last = sub;
        if t == tau {
            sampled = sub;
        }
        if t % stride == 0 || t == horizon {
            trace.push(TracePoint {
                t,
                value: sub,
                delta,
                x_norm_sq: dot(&x, &x),
            });
        }
        if !sub.is_finite() || (sub0 > 0.0 && sub > 1e6 * sub0) {
            log::warn!("quadratic run diverged at step {t} (seed {seed}, T {horizon})");
            diverged = true;
            if sampled.is_nan() {
                sampled = sub;
            }
            break;
        }
        if t == horizon {
            break;
        }
        add_noise(&mut g, sigma, &mut noise);
        gmax = gmax.max(dot(&g, &g).sqrt());
        let lr = 4.0 / (mu * (t as f64 + 2.0));
        for (x, g) in x.iter_mut().zip(&g) {
            *x -= lr * g;
        }
        project(&mut x, opts.projection_radius);
    }

    let n = steps_seen as f64;
    Ok(QuadraticRun {
        result: TheoremRunResult {
            horizon,
            seed,
            sparsity: compressor.sparsity(),
            result: sampled,
            sampled_index: tau,
            sampled_iterate_value: sampled,
            expected_value: expected,
            avg_pruning_term: pterm / n,
            mean_delta: dsum / n,
            final_value: last,
            diverged,
            gradient_bound: gmax,
            f_star: problem.f_star(),
            step_constant: None,
            trace,
        },
        x_final: x,
    })
}

/// DPF on a strongly convex quadratic with `γ_t = 4/(μ(t+2))`, started at
/// the origin. The reported value is `f(x̂_τ) − f*` for one index drawn from
/// the linearly increasing law over `0..=T`; the weighted expectation over
/// the whole trajectory is kept alongside.
pub fn run_theorem1(
    problem: &QuadraticProblem,
    compressor: &ConvexCompressor,
    horizon: u64,
    seed: u64,
    opts: &LabOptions,
) -> Result<TheoremRunResult> {
    Ok(run_quadratic(problem, compressor, horizon, seed, opts)?.result)
}

/// Starting point of the nonconvex harness: uniform in the operating box.
pub fn double_well_start(toy: &DoubleWell, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, INIT_STREAM);
    let r = toy.radius();
    (0..toy.dim()).map(|_| rng.random_range(-r..=r)).collect()
}

const PILOT_STEPS: u64 = 1000;

/// Largest stochastic gradient norm along a pilot run of the same method
/// with step `1/(2L)`.
pub fn pilot_gradient_bound(toy: &DoubleWell, compressor: &ConvexCompressor, seed: u64, opts: &LabOptions) -> Result<f64> {
    let d = toy.dim();
    let mut comp = Compression::new(compressor, d, opts.period)?;
    let mut noise = stream(seed, PILOT_STREAM);
    let mut x = double_well_start(toy, seed);
    let mut x_hat = vec![0.0; d];
    let lr = 0.5 / toy.smoothness();
    let mut gmax = 0.0f64;
    for t in 0..PILOT_STEPS {
        comp.apply(t, &x, &mut x_hat)?;
        let mut g = toy.grad(&x_hat);
        add_noise(&mut g, toy.noise_sigma(), &mut noise);
        gmax = gmax.max(dot(&g, &g).sqrt());
        for (x, g) in x.iter_mut().zip(&g) {
            *x -= lr * g;
        }
    }
    Ok(gmax)
}

/// DPF on the double well with constant step `c/√T`,
/// `c = √((f(x_0) − f*) / (L G²))`, where `G` comes from a pilot run. The
/// reported value is the mean of `‖∇f(x̂_t)‖²` over `t < T`, the
/// expectation for a uniformly drawn iterate.
pub fn run_theorem2(
    toy: &DoubleWell,
    compressor: &ConvexCompressor,
    horizon: u64,
    seed: u64,
    opts: &LabOptions,
) -> Result<TheoremRunResult> {
    if horizon == 0 {
        return Err(Error::invalid("the nonconvex harness needs T >= 1"));
    }
    let d = toy.dim();
    let f_star = toy.f_star();
    let l = toy.smoothness();
    let g_bound = pilot_gradient_bound(toy, compressor, seed, opts)?;
    let mut x = double_well_start(toy, seed);
    let gap0 = toy.value(&x) - f_star;
    let c = if g_bound > 0.0 && gap0 > 0.0 {
        (gap0 / (l * g_bound * g_bound)).sqrt()
    } else {
        0.0
    };
    let lr = c / (horizon as f64).sqrt();

    let mut comp = Compression::new(compressor, d, opts.period)?;
    let mut noise = stream(seed, NOISE_STREAM);
    let mut sampler = stream(seed, SAMPLER_STREAM);
    let tau = sample_uniform(horizon, &mut sampler);
    let stride = trace_stride(horizon, opts.trace_points);

    let mut x_hat = vec![0.0; d];
    let (mut sum, mut sampled, mut pterm, mut dsum, mut last) = (0.0, f64::NAN, 0.0, 0.0, 0.0);
    let mut gmax = 0.0f64;
    let mut diverged = false;
    let mut trace = Vec::new();
    let mut steps_seen = 0u64;

    for t in 0..horizon {
        comp.apply(t, &x, &mut x_hat)?;
        let mut g = toy.grad(&x_hat);
        let gn = dot(&g, &g);
        let (err, delta) = pruning_term(&x, &x_hat);
        steps_seen += 1;
        sum += gn;
        pterm += err;
        dsum += delta;
        last = gn;
        if t == tau {
            sampled = gn;
        }
        if t % stride == 0 || t + 1 == horizon {
            trace.push(TracePoint {
                t,
                value: gn,
                delta,
                x_norm_sq: dot(&x, &x),
            });
        }
        let gap = toy.value(&x_hat) - f_star;
        if !gap.is_finite() || (gap0 > 0.0 && gap > 1e6 * gap0) {
            log::warn!("double-well run diverged at step {t} (seed {seed}, T {horizon})");
            diverged = true;
            break;
        }
        add_noise(&mut g, toy.noise_sigma(), &mut noise);
        gmax = gmax.max(dot(&g, &g).sqrt());
        for (x, g) in x.iter_mut().zip(&g) {
            *x -= lr * g;
        }
        project(&mut x, opts.projection_radius);
    }

    let n = steps_seen as f64;
    let mean = sum / n;
    Ok(TheoremRunResult {
        horizon,
        seed,
        sparsity: compressor.sparsity(),
        result: mean,
        sampled_index: tau,
        sampled_iterate_value: if sampled.is_nan() { last } else { sampled },
        expected_value: mean,
        avg_pruning_term: pterm / n,
        mean_delta: dsum / n,
        final_value: last,
        diverged,
        gradient_bound: g_bound.max(gmax),
        f_star,
        step_constant: Some(c),
        trace,
    })
}

/// Paired comparison of DPF against pruning the last SGD iterate once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneShotComparison {
    pub horizon: u64,
    pub seed: u64,
    pub sparsity: f64,
    /// `f(x̂_T) − f*` for DPF.
    pub dpf_final: f64,
    /// `f(m_T ⊙ x_T) − f*` for SGD followed by one magnitude prune.
    pub one_shot_final: f64,
    pub dpf_avg_pruning_term: f64,
    pub dpf_mean_delta: f64,
    /// `δ_T ‖x_T‖²` of the one-shot prune.
    pub one_shot_pruning_term: f64,
    pub one_shot_delta: f64,
}

pub fn one_shot_compare(
    problem: &QuadraticProblem,
    sparsity: f64,
    horizon: u64,
    seed: u64,
    opts: &LabOptions,
) -> Result<OneShotComparison> {
    let sgd = run_quadratic(problem, &ConvexCompressor::dense(), horizon, seed, opts)?;
    let layout = ParamLayout::flat(problem.dim());
    let mask = magnitude_mask(&sgd.x_final, &layout, sparsity, PruneScope::Global)?;
    let mut pruned = vec![0.0; problem.dim()];
    apply_mask_into(&sgd.x_final, &mask, &mut pruned)?;
    let (err, delta) = pruning_term(&sgd.x_final, &pruned);
    let dpf = run_quadratic(problem, &ConvexCompressor::Magnitude { sparsity }, horizon, seed, opts)?.result;
    Ok(OneShotComparison {
        horizon,
        seed,
        sparsity,
        dpf_final: dpf.final_value,
        one_shot_final: problem.suboptimality(&pruned),
        dpf_avg_pruning_term: dpf.avg_pruning_term,
        dpf_mean_delta: dpf.mean_delta,
        one_shot_pruning_term: err,
        one_shot_delta: delta,
    })
}
