use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Coupled double well
/// `f(x) = Σ (x_i² − 1)² / 4 + ε Σ x_i x_{i+1}`.
///
/// Each coordinate has wells at ±1; a positive coupling favours alternating
/// signs between neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWell {
    dim: usize,
    coupling: f64,
    noise_sigma: f64,
    /// Radius (in the max norm) of the region the smoothness constant covers.
    radius: f64,
}

impl DoubleWell {
    pub fn new(dim: usize, coupling: f64, noise_sigma: f64, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !(noise_sigma >= 0.0) || !(radius > 0.0) || !coupling.is_finite() {
            return Err(Error::invalid("double well needs sigma >= 0, radius > 0 and finite coupling"));
        }
        Ok(DoubleWell {
            dim,
            coupling,
            noise_sigma,
            radius,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let wells: f64 = x.iter().map(|v| (v * v - 1.0).powi(2) / 4.0).sum();
        let chain: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
        wells + self.coupling * chain
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut g = x[i] * (x[i] * x[i] - 1.0);
                if i > 0 {
                    g += self.coupling * x[i - 1];
                }
                if i + 1 < n {
                    g += self.coupling * x[i + 1];
                }
                g
            })
            .collect()
    }

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

    /// Upper bound on the Hessian norm over `‖x‖_∞ ≤ radius`: the diagonal
    /// is `3x_i² − 1` and the tridiagonal coupling adds at most `2|ε|`.
    pub fn smoothness(&self) -> f64 {
        let r = self.radius;
        (3.0 * r * r - 1.0).max(1.0) + 2.0 * self.coupling.abs()
    }

    /// Global minimum value, found by gradient descent from the alternating
    /// sign pattern `(1, −1, 1, …)` (the coupled ground state for ε ≥ 0).
    pub fn f_star(&self) -> f64 {
        let sign = if self.coupling >= 0.0 { -1.0 } else { 1.0 };
        let mut x: Vec<f64> = (0..self.dim).map(|i| if i % 2 == 0 { 1.0 } else { sign }).collect();
        let step = 0.5 / self.smoothness();
        for _ in 0..100_000 {
            let g = self.grad(&x);
            let norm2: f64 = g.iter().map(|g| g * g).sum();
            if norm2 < 1e-28 {
                break;
            }
            for (x, g) in x.iter_mut().zip(&g) {
                *x -= step * g;
            }
        }
        self.value(&x)
    }
}
