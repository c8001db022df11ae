//! Independent validation of the partition distribution.
//!
//! The probability of a partition with per-group per-cluster counts
//! `q_{i,k}` is the integral over the auxiliary variables
//!
//! ```text
//! Π = ∫ (Π_i u_i^{n_i-1} / Γ(n_i)) e^{-ψ(u)} Π_k τ_{q_k}(u) du
//! ```
//!
//! evaluated here by tensor-product generalized Gauss–Laguerre quadrature
//! after the substitution `v_i = log(1 + u_i)`, which turns the algebraic
//! tails of the integrand into exponential ones. The result is checked
//! against the Ewens sampling formula in the single-group single-CRM case
//! and against a truncated stick-breaking simulation of the underlying
//! random measures in general.

use crate::levy::{self, AuxVars, ClusterCounts, LevyContext, LmrmParams};
use crate::math::log_sum_exp;
use crate::quadrature::{GaussLaguerre, LogSumAccumulator};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use statrs::function::gamma::ln_gamma;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EppfError {
    #[error("invalid partition spec: {0}")]
    InvalidSpec(String),
    #[error("quadrature supports at most 3 non-empty groups, got {0}")]
    TooManyGroups(usize),
    #[error("quadrature did not converge: last two estimates {previous} and {last}")]
    NonConvergence { last: f64, previous: f64 },
}

/// A partition of grouped observations given by its count vectors, plus
/// the group sizes they must add up to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    counts: Vec<ClusterCounts>,
    group_sizes: Vec<usize>,
}

impl PartitionSpec {
    pub fn new(counts: Vec<ClusterCounts>, group_sizes: Vec<usize>) -> Result<Self, EppfError> {
        if counts.is_empty() {
            return Err(EppfError::InvalidSpec("need at least one cluster".into()));
        }
        if group_sizes.is_empty() {
            return Err(EppfError::InvalidSpec("need at least one group".into()));
        }
        let d = group_sizes.len();
        let n_total: usize = group_sizes.iter().sum();
        if counts.len() > n_total {
            return Err(EppfError::InvalidSpec(format!(
                "{} clusters cannot hold only {n_total} observations",
                counts.len()
            )));
        }
        for (k, c) in counts.iter().enumerate() {
            if c.n_groups() != d {
                return Err(EppfError::InvalidSpec(format!(
                    "cluster {k} has {} groups, expected {d}",
                    c.n_groups()
                )));
            }
            if c.total() == 0 {
                return Err(EppfError::InvalidSpec(format!("cluster {k} is empty")));
            }
        }
        for i in 0..d {
            let total: usize = counts.iter().map(|c| c.count(i)).sum();
            if total != group_sizes[i] {
                return Err(EppfError::InvalidSpec(format!(
                    "group {i}: counts sum to {total}, expected {}",
                    group_sizes[i]
                )));
            }
        }
        Ok(Self { counts, group_sizes })
    }

    /// Builds the spec from a restricted-growth labeling of the flattened
    /// observations, group-major.
    pub fn from_rgs(rgs: &[u8], group_sizes: &[usize]) -> Result<Self, EppfError> {
        let n_total: usize = group_sizes.iter().sum();
        if rgs.len() != n_total {
            return Err(EppfError::InvalidSpec("label vector does not match group sizes".into()));
        }
        let k = rgs.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        let d = group_sizes.len();
        let mut q = vec![vec![0usize; d]; k];
        let mut pos = 0;
        for (i, &n) in group_sizes.iter().enumerate() {
            for _ in 0..n {
                q[rgs[pos] as usize][i] += 1;
                pos += 1;
            }
        }
        Self::new(q.into_iter().map(ClusterCounts::new).collect(), group_sizes.to_vec())
    }

    pub fn n_clusters(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[ClusterCounts] {
        &self.counts
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    /// Count vectors sorted into a canonical order; two specs describe the
    /// same partition structure iff these agree.
    pub fn canonical_structure(&self) -> Vec<Vec<usize>> {
        let mut s: Vec<Vec<usize>> = self.counts.iter().map(|c| c.counts().to_vec()).collect();
        s.sort();
        s.reverse();
        s
    }

    /// Copy with one more group-`i` observation added to cluster `k`.
    pub fn with_added_to(&self, k: usize, group: usize) -> Self {
        let mut counts = self.counts.clone();
        counts[k] = counts[k].plus(group);
        let mut group_sizes = self.group_sizes.clone();
        group_sizes[group] += 1;
        Self { counts, group_sizes }
    }

    /// Copy with one more group-`i` observation in a fresh singleton cluster.
    pub fn with_new_singleton(&self, group: usize) -> Self {
        let mut counts = self.counts.clone();
        counts.push(ClusterCounts::singleton(self.group_sizes.len(), group));
        let mut group_sizes = self.group_sizes.clone();
        group_sizes[group] += 1;
        Self { counts, group_sizes }
    }
}

/// Controls for the adaptive tensor quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSettings {
    /// Nodes per dimension at the first refinement level.
    pub initial_nodes: usize,
    /// Hard cap on nodes per dimension.
    pub max_nodes_per_dim: usize,
    /// Hard cap on total integrand evaluations per refinement level.
    pub max_evals: usize,
    /// Convergence threshold on the change of the log value between
    /// consecutive levels (a relative tolerance on the value itself).
    pub tolerance: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { initial_nodes: 24, max_nodes_per_dim: 512, max_evals: 40_000_000, tolerance: 1e-9 }
    }
}

// Rules are reused heavily across partitions of the same sizes; the
// Laguerre exponent is always the integer n_i - 1 here.
fn cached_rule(nodes: usize, exponent: usize) -> Arc<GaussLaguerre> {
    static CACHE: OnceLock<Mutex<BTreeMap<(usize, usize), Arc<GaussLaguerre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry((nodes, exponent))
        .or_insert_with(|| Arc::new(GaussLaguerre::new(nodes, exponent as f64)))
        .clone()
}

/// Value used for the auxiliary variable of a group with no observations:
/// such a group contributes no integral and its `u_i` is pinned at zero.
const PINNED_U: f64 = 1e-300;

fn joint_log_density(params: &LmrmParams, u: &AuxVars, counts: &[ClusterCounts]) -> f64 {
    let ctx = LevyContext::new(params, u);
    let mut value = -ctx.psi();
    for c in counts {
        value += ctx.log_tau(c);
    }
    value
}

/// Ascends `Σ (n_i-1) log u_i - ψ + Σ log τ` over the active components of
/// `u` (log-scale coordinates, backtracking line search). Used only to
/// scale the quadrature grid, so a rough optimum is fine.
fn find_mode(
    params: &LmrmParams,
    counts: &[ClusterCounts],
    group_sizes: &[usize],
    active: &[usize],
) -> Vec<f64> {
    let d = group_sizes.len();
    let build = |v: &[f64]| -> AuxVars {
        let mut u = vec![PINNED_U; d];
        for (slot, &i) in active.iter().enumerate() {
            u[i] = v[slot].exp();
        }
        AuxVars::new(u)
    };
    let objective = |v: &[f64]| -> f64 {
        let u = build(v);
        let mut value = joint_log_density(params, &u, counts);
        for &i in active {
            if group_sizes[i] > 1 {
                value += (group_sizes[i] as f64 - 1.0) * u.get(i).ln();
            }
        }
        value
    };

    let mut v = vec![0.0; active.len()];
    let mut current = objective(&v);
    let mut step = 0.5;
    for _ in 0..200 {
        let u = build(&v);
        let grad_u = levy::grad_log_joint_u(params, &u, counts, group_sizes);
        let grad_v: Vec<f64> = active
            .iter()
            .enumerate()
            .map(|(slot, &i)| grad_u[i] * v[slot].exp())
            .collect();
        let norm = grad_v.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if norm < 1e-9 {
            break;
        }
        let mut advanced = false;
        while step > 1e-12 {
            let trial: Vec<f64> = v
                .iter()
                .zip(&grad_v)
                .map(|(&vi, &g)| (vi + (step * g).clamp(-2.0, 2.0)).clamp(-300.0, 300.0))
                .collect();
            let value = objective(&trial);
            if value > current {
                v = trial;
                current = value;
                step *= 1.5;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    v.iter().map(|&vi| vi.exp()).collect()
}

/// One refinement level of the tensor quadrature; returns the log value.
fn tensor_level(
    params: &LmrmParams,
    spec: &PartitionSpec,
    active: &[usize],
    scales: &[f64],
    nodes: usize,
) -> f64 {
    let d = spec.group_sizes.len();
    // per-dimension log factors at every node
    let mut bases: Vec<Vec<f64>> = Vec::with_capacity(active.len());
    let mut u_values: Vec<Vec<f64>> = Vec::with_capacity(active.len());
    for (slot, &i) in active.iter().enumerate() {
        let n_i = spec.group_sizes[i];
        let a = (n_i - 1) as f64;
        let c = scales[slot];
        let rule = cached_rule(nodes, n_i - 1);
        let mut base = Vec::with_capacity(nodes);
        let mut us = Vec::with_capacity(nodes);
        for (&x, &log_w) in rule.nodes().iter().zip(rule.log_weights()) {
            let v = c * x;
            let u = v.exp_m1();
            // c · w_j · x^{-a} e^{x} · u^{n_i-1} e^{v} / Γ(n_i)
            let b = c.ln() + log_w - a * x.ln() + x + a * u.ln() + v - ln_gamma(n_i as f64);
            base.push(b);
            us.push(u);
        }
        bases.push(base);
        u_values.push(us);
    }

    let mut acc = LogSumAccumulator::default();
    let mut index = vec![0usize; active.len()];
    let mut u = vec![PINNED_U; d];
    loop {
        let mut log_term = 0.0;
        for (slot, &i) in active.iter().enumerate() {
            log_term += bases[slot][index[slot]];
            u[i] = u_values[slot][index[slot]];
        }
        let aux = AuxVars::new(u.clone());
        log_term += joint_log_density(params, &aux, &spec.counts);
        acc.add(log_term);

        // odometer
        let mut slot = 0;
        loop {
            if slot == active.len() {
                return acc.value();
            }
            index[slot] += 1;
            if index[slot] < nodes {
                break;
            }
            index[slot] = 0;
            slot += 1;
        }
    }
}

/// Log of the partition probability, by mode-scaled tensor Gauss–Laguerre
/// quadrature in `log(1+u)` coordinates with node doubling until two
/// consecutive levels agree to `settings.tolerance`.
pub fn log_eppf(
    params: &LmrmParams,
    spec: &PartitionSpec,
    settings: &QuadratureSettings,
) -> Result<f64, EppfError> {
    if spec.group_sizes.len() != params.n_groups() {
        return Err(EppfError::InvalidSpec("params and spec disagree on the group count".into()));
    }
    let active: Vec<usize> =
        (0..spec.group_sizes.len()).filter(|&i| spec.group_sizes[i] >= 1).collect();
    if active.is_empty() {
        return Err(EppfError::InvalidSpec("all groups are empty".into()));
    }
    if active.len() > 3 {
        return Err(EppfError::TooManyGroups(active.len()));
    }

    let n_total: usize = spec.group_sizes.iter().sum();
    let mode = find_mode(params, &spec.counts, &spec.group_sizes, &active);
    let scales: Vec<f64> = active
        .iter()
        .enumerate()
        .map(|(slot, &i)| {
            let n_i = spec.group_sizes[i];
            // slowest possible decay rate of the integrand in v_i
            let tail_rate = params.alpha() * params.n_crms() as f64 + (n_total - n_i) as f64;
            let tail_scale = 1.0 / tail_rate;
            if n_i >= 2 {
                let v_star = mode[slot].ln_1p();
                (v_star / (n_i - 1) as f64).min(tail_scale).max(1e-3 * tail_scale)
            } else {
                tail_scale
            }
        })
        .collect();

    let mut nodes = settings.initial_nodes.max(4);
    let mut previous: Option<f64> = None;
    loop {
        let evals = (nodes as f64).powi(active.len() as i32);
        if nodes > settings.max_nodes_per_dim || evals > settings.max_evals as f64 {
            let last = previous.expect("at least one level is always evaluated");
            return Err(EppfError::NonConvergence { last, previous: last });
        }
        let value = tensor_level(params, spec, &active, &scales, nodes);
        if let Some(prev) = previous {
            if (value - prev).abs() <= settings.tolerance {
                return Ok(value);
            }
        }
        previous = Some(value);
        nodes *= 2;
    }
}

/// The Ewens sampling formula `log[α^K Π_k Γ(t_k) / (α)_n]`, the exact
/// partition probability when there is a single group and a single CRM.
pub fn ewens_log_eppf(alpha: f64, spec: &PartitionSpec) -> Result<f64, EppfError> {
    if spec.group_sizes.len() != 1 {
        return Err(EppfError::InvalidSpec("the Ewens formula needs exactly one group".into()));
    }
    let n = spec.group_sizes[0] as f64;
    let mut value = spec.n_clusters() as f64 * alpha.ln() - (ln_gamma(alpha + n) - ln_gamma(alpha));
    for c in spec.counts() {
        value += ln_gamma(c.total() as f64);
    }
    Ok(value)
}

/// Monte Carlo estimate of one partition's probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub count: u64,
}

/// Simulates the underlying random measures directly — each Gamma CRM as a
/// total mass `T_r ~ Gamma(α, 1)` times stick-breaking weights truncated at
/// `truncation` atoms — draws the grouped observations from the normalized
/// mixtures, and tallies the induced partitions.
///
/// Sticks are materialized lazily: with a handful of observations per draw
/// only the first few atoms of each measure are ever visited, which leaves
/// the sampled law identical to the fully materialized truncation.
pub fn mc_partition_probs<R: Rng>(
    params: &LmrmParams,
    group_sizes: &[usize],
    truncation: usize,
    draws: usize,
    rng: &mut R,
) -> BTreeMap<Vec<u8>, McEstimate> {
    let n_total: usize = group_sizes.iter().sum();
    assert!(n_total >= 1 && n_total <= 4, "oracle is meant for up to 4 observations");
    assert_eq!(group_sizes.len(), params.n_groups());
    assert!(truncation >= 2);
    assert!(draws >= 1);

    let r = params.n_crms();
    let gamma = Gamma::new(params.alpha(), 1.0).expect("alpha > 0");
    let beta = Beta::new(1.0, params.alpha()).expect("alpha > 0");

    let mut tallies: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    let mut totals = vec![0.0f64; r];
    let mut sticks: Vec<Vec<f64>> = vec![Vec::new(); r];
    let mut atoms: Vec<(usize, usize)> = Vec::with_capacity(n_total);

    for _ in 0..draws {
        for t in totals.iter_mut() {
            *t = gamma.sample(rng);
        }
        for s in sticks.iter_mut() {
            s.clear();
        }
        atoms.clear();
        for (i, &n_i) in group_sizes.iter().enumerate() {
            for _ in 0..n_i {
                // which measure: mass w_{i,r} T_r
                let mut cum = 0.0;
                let total_mass: f64 = (0..r).map(|rr| params.weight(i, rr) * totals[rr]).sum();
                let target = rng.random::<f64>() * total_mass;
                let mut chosen = r - 1;
                for rr in 0..r {
                    cum += params.weight(i, rr) * totals[rr];
                    if target <= cum {
                        chosen = rr;
                        break;
                    }
                }
                // which atom: walk the stick-breaking weights
                let s = &mut sticks[chosen];
                let mut j = 0usize;
                loop {
                    if j + 1 == truncation {
                        break; // truncation lump
                    }
                    if j >= s.len() {
                        s.push(beta.sample(rng));
                    }
                    if rng.random::<f64>() < s[j] {
                        break;
                    }
                    j += 1;
                }
                atoms.push((chosen, j));
            }
        }
        // canonical restricted-growth labeling of the shared atoms
        let mut seen: Vec<(usize, usize)> = Vec::new();
        let rgs: Vec<u8> = atoms
            .iter()
            .map(|a| {
                if let Some(pos) = seen.iter().position(|s| s == a) {
                    pos as u8
                } else {
                    seen.push(*a);
                    (seen.len() - 1) as u8
                }
            })
            .collect();
        *tallies.entry(rgs).or_insert(0) += 1;
    }

    tallies
        .into_iter()
        .map(|(rgs, count)| {
            let p = count as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            (rgs, McEstimate { probability: p, std_error: se, count })
        })
        .collect()
}

/// Checks the EPPF's additivity: adding one more group-`i` observation and
/// marginalizing over where it lands must give back the original partition
/// probability. Returns the relative residual for each group.
pub fn eppf_consistency_check(
    params: &LmrmParams,
    spec: &PartitionSpec,
    settings: &QuadratureSettings,
) -> Result<Vec<f64>, EppfError> {
    let base = log_eppf(params, spec, settings)?;
    let mut residuals = Vec::with_capacity(spec.group_sizes.len());
    for i in 0..spec.group_sizes.len() {
        let mut log_terms = Vec::with_capacity(spec.n_clusters() + 1);
        for k in 0..spec.n_clusters() {
            log_terms.push(log_eppf(params, &spec.with_added_to(k, i), settings)?);
        }
        log_terms.push(log_eppf(params, &spec.with_new_singleton(i), settings)?);
        let marginal = log_sum_exp(&log_terms);
        residuals.push(((base - marginal).exp() - 1.0).abs());
    }
    Ok(residuals)
}

/// All set partitions of `n` items as restricted-growth strings.
pub fn all_set_partitions(n: usize) -> Vec<Vec<u8>> {
    fn extend(prefix: &mut Vec<u8>, max_used: u8, n: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for label in 0..=max_used + 1 {
            prefix.push(label);
            extend(prefix, max_used.max(label), n, out);
            prefix.pop();
        }
    }
    assert!(n >= 1);
    let mut out = Vec::new();
    let mut prefix = vec![0u8];
    extend(&mut prefix, 0, n, &mut out);
    out
}
