//! Generalized Gauss–Laguerre rules, computed with the Golub–Welsch
//! algorithm: nodes are the eigenvalues of the symmetric tridiagonal
//! Jacobi matrix of the Laguerre recurrence, weights come from the first
//! eigenvector components. Weights are exposed on the log scale because
//! they underflow long before the node counts used here become expensive.

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

/// An `n`-point rule for `∫₀^∞ x^a e^{-x} f(x) dx ≈ Σ_j w_j f(x_j)`.
#[derive(Debug, Clone)]
pub struct GaussLaguerre {
    nodes: Vec<f64>,
    log_weights: Vec<f64>,
}

impl GaussLaguerre {
    /// Builds the rule of the given degree for exponent `a > -1`.
    ///
    /// Nodes are the eigenvalues of the Jacobi matrix. Weights are NOT
    /// taken from the eigenvectors: their first components lose all
    /// relative accuracy once a weight drops below machine epsilon, which
    /// poisons log-space quadrature at moderate degrees. Instead each
    /// weight is `1 / Σ_k p_k(x_j)²` with the orthonormal polynomials
    /// evaluated by their three-term recurrence under explicit rescaling,
    /// which keeps full relative accuracy however small the weight is.
    pub fn new(degree: usize, a: f64) -> Self {
        assert!(degree >= 1, "need at least one node");
        assert!(a > -1.0, "Laguerre exponent must exceed -1");
        let mut jacobi = DMatrix::<f64>::zeros(degree, degree);
        for j in 0..degree {
            jacobi[(j, j)] = 2.0 * j as f64 + 1.0 + a;
            if j + 1 < degree {
                let off = ((j as f64 + 1.0) * (j as f64 + 1.0 + a)).sqrt();
                jacobi[(j, j + 1)] = off;
                jacobi[(j + 1, j)] = off;
            }
        }
        let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().cloned().collect();
        nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let log_mu0 = ln_gamma(a + 1.0);
        let log_weights = nodes
            .iter()
            .map(|&x| -Self::log_sum_p_squared(x, a, degree, log_mu0))
            .collect();
        Self { nodes, log_weights }
    }

    /// log Σ_{k<degree} p_k(x)² for the orthonormal generalized Laguerre
    /// polynomials, with running rescaling so huge p_k values never
    /// overflow.
    fn log_sum_p_squared(x: f64, a: f64, degree: usize, log_mu0: f64) -> f64 {
        let mut log_offset = -0.5 * log_mu0; // absorb p_0 = 1/sqrt(μ₀)
        let mut p_prev = 0.0f64; // p_{k-1} / e^{offset}
        let mut p = 1.0f64; // p_k / e^{offset}
        let mut sum = 1.0f64; // Σ p² / e^{2 offset}
        let mut beta_k = 0.0f64;
        for k in 0..degree - 1 {
            let alpha_k = 2.0 * k as f64 + 1.0 + a;
            let beta_k1 = ((k as f64 + 1.0) * (k as f64 + 1.0 + a)).sqrt();
            let p_next = ((x - alpha_k) * p - beta_k * p_prev) / beta_k1;
            p_prev = p;
            p = p_next;
            beta_k = beta_k1;
            sum += p * p;
            if p.abs() > 1e120 {
                let scale = p.abs();
                let inv = 1.0 / scale;
                p *= inv;
                p_prev *= inv;
                sum *= inv * inv;
                log_offset += scale.ln();
            }
        }
        2.0 * log_offset + sum.ln()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Plain quadrature of `x^a e^{-x} f(x)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(&x, &lw)| lw.exp() * f(x))
            .sum()
    }
}

/// Streaming log-sum-exp accumulator for quadrature sums too large to
/// materialize.
#[derive(Debug, Clone, Copy)]
pub struct LogSumAccumulator {
    max: f64,
    scaled_sum: f64,
}

impl Default for LogSumAccumulator {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, scaled_sum: 0.0 }
    }
}

impl LogSumAccumulator {
    pub fn add(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if log_term <= self.max {
            self.scaled_sum += (log_term - self.max).exp();
        } else {
            self.scaled_sum = self.scaled_sum * (self.max - log_term).exp() + 1.0;
            self.max = log_term;
        }
    }

    /// log Σ exp(terms); −∞ if nothing was added.
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled_sum.ln()
        }
    }
}
