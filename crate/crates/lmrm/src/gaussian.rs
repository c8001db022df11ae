//! Fixed-variance Gaussian likelihood with a conjugate Gaussian base
//! measure. The likelihood standard deviation is a run constant, never
//! inferred, so the cluster posterior stays a one-line Normal update.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `x | θ ~ Normal(θ, sigma²)` with base measure `θ ~ Normal(base_mean, base_sd²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    pub sigma: f64,
    pub base_mean: f64,
    pub base_sd: f64,
}

fn log_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * (2.0 * PI).ln() - sd.ln() - 0.5 * z * z
}

impl GaussianModel {
    pub fn new(sigma: f64, base_mean: f64, base_sd: f64) -> Self {
        assert!(sigma > 0.0 && sigma.is_finite(), "sigma must be positive");
        assert!(base_sd > 0.0 && base_sd.is_finite(), "base_sd must be positive");
        Self { sigma, base_mean, base_sd }
    }

    /// log Normal(x; theta, sigma).
    pub fn log_likelihood(&self, x: f64, theta: f64) -> f64 {
        log_normal_pdf(x, theta, self.sigma)
    }

    /// Prior predictive `∫ f(x|θ) H(dθ)`: log Normal(x; base_mean, √(σ² + s0²)).
    pub fn log_marginal(&self, x: f64) -> f64 {
        let sd = (self.sigma * self.sigma + self.base_sd * self.base_sd).sqrt();
        log_normal_pdf(x, self.base_mean, sd)
    }

    /// Mean and standard deviation of the conjugate posterior for a cluster
    /// with `count` observations summing to `sum`.
    pub fn posterior_params(&self, count: usize, sum: f64) -> (f64, f64) {
        assert!(count >= 1, "posterior of an empty cluster is not defined");
        let prior_precision = 1.0 / (self.base_sd * self.base_sd);
        let like_precision = count as f64 / (self.sigma * self.sigma);
        let precision = prior_precision + like_precision;
        let mean = (self.base_mean * prior_precision + sum / (self.sigma * self.sigma)) / precision;
        (mean, precision.sqrt().recip())
    }

    /// Draws a cluster atom from its conjugate Normal posterior.
    pub fn posterior_draw<R: Rng>(&self, count: usize, sum: f64, rng: &mut R) -> f64 {
        let (mean, sd) = self.posterior_params(count, sum);
        Normal::new(mean, sd).expect("posterior sd is positive").sample(rng)
    }
}
