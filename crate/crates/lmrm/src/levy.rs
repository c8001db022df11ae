//! Closed-form Lévy functionals of the mixed Gamma measure.
//!
//! The d-dimensional Lévy intensity of the mixture `μ̃_i = Σ_r w_{i,r} μ_r`
//! (each `μ_r` a Gamma process with intensity `α s⁻¹ e⁻ˢ ds`) lives on the
//! rays `s ↦ (w_{1,r}s, …, w_{d,r}s)`. Every functional below therefore
//! reduces to a sum over `r = 1..R` of one-dimensional Gamma integrals:
//!
//! * `ψ(u)   = α Σ_r log(h_r + 1)`
//! * `τ_q(u) = α Γ(t) Σ_r Π_i w_{i,r}^{q_i} / (h_r + 1)^t`
//!
//! with `h_r = Σ_i w_{i,r} u_i` and `t = Σ_i q_i`. Since `(h_r + 1)^{-t}`
//! underflows already for a few hundred observations, τ and its ratios are
//! only ever exposed on the log scale, with log-sum-exp over `r`.

use crate::math::{log_add_exp, log_sum_exp};
use statrs::function::gamma::ln_gamma;

/// Parameters of the linear mixture of `R` Gamma-process random measures
/// across `d` groups: the Gamma concentration `alpha` and the strictly
/// positive `d × R` mixing matrix `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmrmParams {
    d: usize,
    r: usize,
    alpha: f64,
    /// Row-major `d × R`.
    weights: Vec<f64>,
    /// Cached `ln w_{i,r}`, kept in lockstep with `weights`.
    log_weights: Vec<f64>,
}

impl LmrmParams {
    /// Panics unless `d ≥ 1`, `R ≥ 1`, `alpha > 0` and every weight is
    /// strictly positive and finite.
    pub fn new(d: usize, r: usize, alpha: f64, weights: Vec<f64>) -> Self {
        assert!(d >= 1 && r >= 1, "need at least one group and one CRM");
        assert!(alpha > 0.0 && alpha.is_finite(), "alpha must be positive");
        assert_eq!(weights.len(), d * r, "weight matrix must be d x R");
        assert!(
            weights.iter().all(|&w| w > 0.0 && w.is_finite()),
            "mixing weights must be strictly positive"
        );
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Self { d, r, alpha, weights, log_weights }
    }

    /// All-ones mixing matrix, the usual sampler initialization.
    pub fn ones(d: usize, r: usize, alpha: f64) -> Self {
        Self::new(d, r, alpha, vec![1.0; d * r])
    }

    pub fn n_groups(&self) -> usize {
        self.d
    }

    pub fn n_crms(&self) -> usize {
        self.r
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn weight(&self, group: usize, crm: usize) -> f64 {
        self.weights[group * self.r + crm]
    }

    #[inline]
    pub fn log_weight(&self, group: usize, crm: usize) -> f64 {
        self.log_weights[group * self.r + crm]
    }

    pub fn set_weight(&mut self, group: usize, crm: usize, w: f64) {
        assert!(w > 0.0 && w.is_finite(), "mixing weights must be strictly positive");
        self.weights[group * self.r + crm] = w;
        self.log_weights[group * self.r + crm] = w.ln();
    }

    /// Row-major copy of the weight matrix.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Returns a copy with the CRM columns permuted by `perm` (a
    /// permutation of `0..R`).
    pub fn permute_crms(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.r);
        let mut weights = vec![0.0; self.d * self.r];
        for i in 0..self.d {
            for (new_r, &old_r) in perm.iter().enumerate() {
                weights[i * self.r + new_r] = self.weight(i, old_r);
            }
        }
        Self::new(self.d, self.r, self.alpha, weights)
    }
}

/// The positive auxiliary variables `u_1..u_d` that replace the per-group
/// normalizing constants.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxVars {
    u: Vec<f64>,
}

impl AuxVars {
    pub fn new(u: Vec<f64>) -> Self {
        assert!(!u.is_empty(), "need at least one auxiliary variable");
        assert!(
            u.iter().all(|&v| v > 0.0 && v.is_finite()),
            "auxiliary variables must be strictly positive"
        );
        Self { u }
    }

    pub fn ones(d: usize) -> Self {
        Self::new(vec![1.0; d])
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.u[i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        assert!(v > 0.0 && v.is_finite(), "auxiliary variables must be strictly positive");
        self.u[i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }
}

/// Per-cluster occupancy: `q_i` observations from group `i`, with the
/// cached total `t = Σ_i q_i`. A live cluster always has `t ≥ 1`; `t = 0`
/// only occurs transiently while the partition is being edited.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterCounts {
    q: Vec<usize>,
    t: usize,
}

impl ClusterCounts {
    pub fn new(q: Vec<usize>) -> Self {
        assert!(!q.is_empty());
        let t = q.iter().sum();
        Self { q, t }
    }

    /// The unit vector δ_i: a single observation from group `i`.
    pub fn singleton(d: usize, group: usize) -> Self {
        assert!(group < d);
        let mut q = vec![0; d];
        q[group] = 1;
        Self { q, t: 1 }
    }

    pub fn n_groups(&self) -> usize {
        self.q.len()
    }

    #[inline]
    pub fn count(&self, group: usize) -> usize {
        self.q[group]
    }

    pub fn counts(&self) -> &[usize] {
        &self.q
    }

    /// Total occupancy across groups.
    #[inline]
    pub fn total(&self) -> usize {
        self.t
    }

    pub fn increment(&mut self, group: usize) {
        self.q[group] += 1;
        self.t += 1;
    }

    pub fn decrement(&mut self, group: usize) {
        assert!(self.q[group] > 0, "decrement of an empty group count");
        self.q[group] -= 1;
        self.t -= 1;
    }

    /// Copy with `q_i` incremented.
    pub fn plus(&self, group: usize) -> Self {
        let mut c = self.clone();
        c.increment(group);
        c
    }
}

/// Cached per-`(params, u)` quantities: `h_r = Σ_i w_{i,r} u_i` and
/// `ln(h_r + 1)`. All τ/ψ evaluations at fixed `(params, u)` should go
/// through one context; the Gibbs sweep keeps one per sweep.
pub struct LevyContext<'a> {
    params: &'a LmrmParams,
    h: Vec<f64>,
    log_h1: Vec<f64>,
}

impl<'a> LevyContext<'a> {
    pub fn new(params: &'a LmrmParams, u: &AuxVars) -> Self {
        assert_eq!(u.len(), params.d, "auxiliary vector length must match group count");
        let mut h = vec![0.0; params.r];
        for r in 0..params.r {
            let mut acc = 0.0;
            for i in 0..params.d {
                acc += params.weight(i, r) * u.get(i);
            }
            h[r] = acc;
        }
        let log_h1 = h.iter().map(|&hr| hr.ln_1p()).collect();
        Self { params, h, log_h1 }
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// `ψ(u) = α Σ_r log(h_r + 1)`.
    pub fn psi(&self) -> f64 {
        self.params.alpha * self.log_h1.iter().sum::<f64>()
    }

    /// Per-CRM log summands of τ up to the `α Γ(t)` factor:
    /// `log S_r = Σ_i q_i ln w_{i,r} − t ln(h_r + 1)`.
    pub fn cluster_log_terms(&self, counts: &ClusterCounts) -> Vec<f64> {
        debug_assert_eq!(counts.n_groups(), self.params.d);
        let t = counts.total() as f64;
        (0..self.params.r)
            .map(|r| {
                let mut s = -t * self.log_h1[r];
                for i in 0..self.params.d {
                    let q = counts.count(i);
                    if q > 0 {
                        s += q as f64 * self.params.log_weight(i, r);
                    }
                }
                s
            })
            .collect()
    }

    /// `log τ_q(u)`, requiring `t ≥ 1`.
    pub fn log_tau(&self, counts: &ClusterCounts) -> f64 {
        assert!(counts.total() >= 1, "tau is only defined for occupied clusters");
        self.params.alpha.ln()
            + ln_gamma(counts.total() as f64)
            + log_sum_exp(&self.cluster_log_terms(counts))
    }

    /// `log [τ_{q+δ_i}(u) / τ_q(u)]`, the predictive weight of adding one
    /// group-`i` observation to an occupied cluster. Evaluated without
    /// forming either τ, so it stays finite for totals where
    /// `(h_r + 1)^{-t}` would underflow.
    pub fn log_tau_ratio(&self, counts: &ClusterCounts, group: usize) -> f64 {
        self.log_tau_ratio_from_terms(&self.cluster_log_terms(counts), counts.total(), group)
    }

    /// Same as [`Self::log_tau_ratio`] but reusing precomputed
    /// `cluster_log_terms` (the Gibbs sweep maintains them incrementally).
    pub fn log_tau_ratio_from_terms(&self, log_terms: &[f64], total: usize, group: usize) -> f64 {
        assert!(total >= 1, "tau ratio needs an occupied cluster");
        assert!(group < self.params.d, "group index out of range");
        let denom = log_sum_exp(log_terms);
        let mut numer = f64::NEG_INFINITY;
        for r in 0..self.params.r {
            numer = log_add_exp(
                numer,
                self.params.log_weight(group, r) - self.log_h1[r] + log_terms[r],
            );
        }
        (total as f64).ln() + numer - denom
    }

    /// `log τ_{δ_i}(u) = log [α Σ_r w_{i,r} / (h_r + 1)]`, the weight of
    /// opening a new cluster with one group-`i` observation.
    pub fn log_tau_new(&self, group: usize) -> f64 {
        assert!(group < self.params.d, "group index out of range");
        let terms: Vec<f64> = (0..self.params.r)
            .map(|r| self.params.log_weight(group, r) - self.log_h1[r])
            .collect();
        self.params.alpha.ln() + log_sum_exp(&terms)
    }

    /// Softmax responsibilities of the CRMs within τ_q:
    /// `ρ_r = S_r / Σ_{r'} S_{r'}`.
    fn crm_responsibilities(&self, counts: &ClusterCounts) -> Vec<f64> {
        let mut terms = self.cluster_log_terms(counts);
        crate::math::normalize_log_weights(&mut terms);
        terms
    }
}

/// `h_r = Σ_i w_{i,r} u_i` for every CRM. Strictly positive.
pub fn h_vector(params: &LmrmParams, u: &AuxVars) -> Vec<f64> {
    LevyContext::new(params, u).h().to_vec()
}

/// `ψ(u) = α Σ_r log(h_r + 1)`; zero exactly when u vanishes.
pub fn psi(params: &LmrmParams, u: &AuxVars) -> f64 {
    LevyContext::new(params, u).psi()
}

/// `log τ_q(u)` in log space; see [`LevyContext::log_tau`].
pub fn log_tau(params: &LmrmParams, u: &AuxVars, counts: &ClusterCounts) -> f64 {
    LevyContext::new(params, u).log_tau(counts)
}

/// Stable `log [τ_{q+δ_i} / τ_q]`; see [`LevyContext::log_tau_ratio`].
pub fn log_tau_ratio(params: &LmrmParams, u: &AuxVars, counts: &ClusterCounts, group: usize) -> f64 {
    LevyContext::new(params, u).log_tau_ratio(counts, group)
}

/// `log τ_{δ_i}(u)`; see [`LevyContext::log_tau_new`].
pub fn log_tau_new(params: &LmrmParams, u: &AuxVars, group: usize) -> f64 {
    LevyContext::new(params, u).log_tau_new(group)
}

fn check_counts_consistency(params: &LmrmParams, counts: &[ClusterCounts], group_sizes: &[usize]) {
    assert_eq!(group_sizes.len(), params.d, "group sizes must match d");
    for c in counts {
        assert_eq!(c.n_groups(), params.d, "cluster counts must match d");
        assert!(c.total() >= 1, "clusters must be occupied");
    }
    // With at least one cluster the counts must add up to the group sizes.
    // An empty cluster list is allowed regardless of `group_sizes` so the
    // bare e^{-ψ} factor can be evaluated on its own.
    if !counts.is_empty() {
        for i in 0..params.d {
            let total: usize = counts.iter().map(|c| c.count(i)).sum();
            assert_eq!(
                total, group_sizes[i],
                "cluster counts for group {i} do not add up to its size"
            );
        }
    }
}

/// Unnormalized log density of the auxiliary variables given the partition:
/// `Σ_i (n_i − 1) log u_i − ψ(u) + Σ_k log τ_{q_k}(u)`.
pub fn log_joint_aux(
    params: &LmrmParams,
    u: &AuxVars,
    counts: &[ClusterCounts],
    group_sizes: &[usize],
) -> f64 {
    check_counts_consistency(params, counts, group_sizes);
    let ctx = LevyContext::new(params, u);
    let mut value = -ctx.psi();
    for i in 0..params.d {
        if group_sizes[i] > 1 {
            value += (group_sizes[i] as f64 - 1.0) * u.get(i).ln();
        }
    }
    for c in counts {
        value += ctx.log_tau(c);
    }
    value
}

/// Gradient of [`log_joint_aux`] in `u`:
/// `(n_i − 1)/u_i − α Σ_r w_{i,r}/(h_r + 1) − Σ_k τ_{q_k+δ_i}/τ_{q_k}`.
pub fn grad_log_joint_u(
    params: &LmrmParams,
    u: &AuxVars,
    counts: &[ClusterCounts],
    group_sizes: &[usize],
) -> Vec<f64> {
    check_counts_consistency(params, counts, group_sizes);
    let ctx = LevyContext::new(params, u);
    let per_cluster_terms: Vec<(Vec<f64>, usize)> = counts
        .iter()
        .map(|c| (ctx.cluster_log_terms(c), c.total()))
        .collect();
    (0..params.d)
        .map(|i| {
            // the u_i^{n_i - 1} factor is absent entirely for empty groups
            let mut g = if group_sizes[i] > 1 {
                (group_sizes[i] as f64 - 1.0) / u.get(i)
            } else {
                0.0
            };
            for r in 0..params.r {
                g -= params.alpha * params.weight(i, r) / (ctx.h[r] + 1.0);
            }
            for (terms, total) in &per_cluster_terms {
                g -= ctx.log_tau_ratio_from_terms(terms, *total, i).exp();
            }
            g
        })
        .collect()
}

/// Gradient of `−ψ(u) + Σ_k log τ_{q_k}(u)` in the mixing weights,
/// returned row-major `d × R`:
/// `−α u_i/(h_r+1) + Σ_k ρ_{k,r} (q_{i,k}/w_{i,r} − t_k u_i/(h_r+1))`,
/// where `ρ_{k,r}` is the CRM responsibility within τ_{q_k}.
pub fn grad_log_joint_w(
    params: &LmrmParams,
    u: &AuxVars,
    counts: &[ClusterCounts],
) -> Vec<f64> {
    for c in counts {
        assert_eq!(c.n_groups(), params.d);
        assert!(c.total() >= 1);
    }
    let ctx = LevyContext::new(params, u);
    let responsibilities: Vec<Vec<f64>> =
        counts.iter().map(|c| ctx.crm_responsibilities(c)).collect();
    let mut grad = vec![0.0; params.d * params.r];
    for i in 0..params.d {
        for r in 0..params.r {
            let h1 = ctx.h[r] + 1.0;
            let mut g = -params.alpha * u.get(i) / h1;
            for (c, rho) in counts.iter().zip(&responsibilities) {
                let q = c.count(i) as f64;
                let t = c.total() as f64;
                g += rho[r] * (q / params.weight(i, r) - t * u.get(i) / h1);
            }
            grad[i * params.r + r] = g;
        }
    }
    grad
}
