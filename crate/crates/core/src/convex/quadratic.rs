use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};

/// `f(x) = ½ xᵀAx − bᵀx` with `A = Q diag(λ) Qᵀ`, plus Gaussian gradient noise.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    dim: usize,
    eigenvalues: Vec<f64>,
    /// Row-major `d × d`.
    a: Vec<f64>,
    b: Vec<f64>,
    x_star: Vec<f64>,
    f_star: f64,
    noise_sigma: f64,
    rotation_seed: u64,
}

/// Random quadratic with eigenvalues log-uniform in `[mu, l]` (both endpoints
/// present when `d ≥ 2`) and a standard-normal minimizer.
pub fn make_quadratic(d: usize, mu: f64, l: f64, seed: u64, noise_sigma: f64) -> Result<QuadraticProblem> {
    QuadraticProblem::build(d, mu, l, seed, noise_sigma, None)
}

impl QuadraticProblem {
    /// Same spectrum and rotation as [`make_quadratic`] with the same seed,
    /// but `b = A x_star` for a caller-chosen minimizer.
    pub fn with_minimizer(d: usize, mu: f64, l: f64, seed: u64, noise_sigma: f64, x_star: Vec<f64>) -> Result<Self> {
        check_len(d, x_star.len())?;
        Self::build(d, mu, l, seed, noise_sigma, Some(x_star))
    }

    fn build(d: usize, mu: f64, l: f64, seed: u64, noise_sigma: f64, x_star: Option<Vec<f64>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !(mu > 0.0) || !(mu <= l) || !l.is_finite() {
            return Err(Error::invalid(format!("need 0 < mu <= L, got mu={mu}, L={l}")));
        }
        if !(noise_sigma >= 0.0) {
            return Err(Error::invalid("noise sigma must be non-negative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (mu.ln(), l.ln());
        let mut eigenvalues: Vec<f64> = (0..d).map(|_| rng.random_range(lo..=hi).exp()).collect();
        eigenvalues[0] = mu;
        if d > 1 {
            eigenvalues[1] = l;
        }
        let a = if mu == l {
            let mut a = vec![0.0; d * d];
            for i in 0..d {
                a[i * d + i] = mu;
            }
            a
        } else {
            let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
            let q = g.qr().q();
            let scaled = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&eigenvalues));
            let m = scaled * q.transpose();
            let mut a = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    // symmetrize away rounding asymmetry
                    a[i * d + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
                }
            }
            a
        };
        let x_star = x_star.unwrap_or_else(|| (0..d).map(|_| rng.sample(StandardNormal)).collect());
        let mut p = QuadraticProblem {
            dim: d,
            eigenvalues,
            b: vec![0.0; d],
            a,
            x_star,
            f_star: 0.0,
            noise_sigma,
            rotation_seed: seed,
        };
        p.b = p.matvec(&p.x_star);
        p.f_star = p.value(&p.x_star);
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mu(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn l(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn rotation_seed(&self) -> u64 {
        self.rotation_seed
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        self.a.chunks_exact(d).map(|row| row.iter().zip(x).map(|(a, x)| a * x).sum()).collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let ax = self.matvec(x);
        0.5 * dot(x, &ax) - dot(&self.b, x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.matvec(x);
        for (g, b) in g.iter_mut().zip(&self.b) {
            *g -= b;
        }
        g
    }

    /// `f(x) − f*` computed as `½ uᵀAu` with `u = x − x*`, which avoids the
    /// cancellation of subtracting two nearly equal values.
    pub fn suboptimality(&self, x: &[f64]) -> f64 {
        let u: Vec<f64> = x.iter().zip(&self.x_star).map(|(x, s)| x - s).collect();
        0.5 * dot(&u, &self.matvec(&u))
    }

    /// `∇f(x) + σζ` with `ζ` standard normal.
    pub fn stochastic_grad<R: Rng>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        let mut g = self.grad(x);
        if self.noise_sigma > 0.0 {
            for g in &mut g {
                let z: f64 = rng.sample(StandardNormal);
                *g += self.noise_sigma * z;
            }
        }
        g
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}
