//! Collapsed Gibbs sampler for the grouped mixture.
//!
//! One iteration is: (1) resample every assignment `c_{i,j}` from its
//! conditional — existing clusters weighted by `f(x|θ_k) · τ_{q_k+δ_i}/τ_{q_k}`,
//! a new cluster by `∫f(x|θ)H(dθ) · τ_{δ_i}` — (2) redraw every atom from
//! its conjugate posterior, (3) Metropolis-update the auxiliary variables
//! `u_i` and (4) the mixing weights `w_{i,r}`, both componentwise on the
//! log scale with the Jacobian folded into the acceptance ratio. Setting
//! `R = 1` recovers the usual Dirichlet-process updates.

use crate::data::GroupedDataset;
use crate::gaussian::GaussianModel;
use crate::levy::{self, AuxVars, LevyContext, LmrmParams};
use crate::partition::{AttachTarget, PartitionState};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid sampler configuration: {0}")]
    Invalid(String),
}

/// Proposal flavor for the log-scale Metropolis updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalKind {
    RandomWalk,
    /// Langevin-type proposal centered at a half gradient step, with the
    /// full Metropolis correction so the stationary law is unchanged.
    GradientInformed,
}

/// Prior on each mixing weight. The weights need a proper prior for their
/// posterior to be proper; both choices keep suppressed weights visible
/// near zero instead of pinning them there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightPrior {
    Exponential { rate: f64 },
    HalfNormal { scale: f64 },
}

impl WeightPrior {
    pub fn log_density(&self, w: f64) -> f64 {
        match *self {
            WeightPrior::Exponential { rate } => rate.ln() - rate * w,
            WeightPrior::HalfNormal { scale } => {
                0.5 * (2.0 / (std::f64::consts::PI * scale * scale)).ln()
                    - 0.5 * w * w / (scale * scale)
            }
        }
    }

    pub fn dlog_dw(&self, w: f64) -> f64 {
        match *self {
            WeightPrior::Exponential { rate } => -rate,
            WeightPrior::HalfNormal { scale } => -w / (scale * scale),
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let ok = match *self {
            WeightPrior::Exponential { rate } => rate > 0.0,
            WeightPrior::HalfNormal { scale } => scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ConfigError::Invalid("weight prior scale must be positive".into()))
        }
    }
}

impl Default for WeightPrior {
    fn default() -> Self {
        WeightPrior::Exponential { rate: 1.0 }
    }
}

/// Initial partition of the observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PartitionInit {
    #[default]
    SingleCluster,
    PerGroup,
    Random { k0: usize },
}

fn default_u_step() -> f64 {
    0.3
}
fn default_w_step() -> f64 {
    0.3
}
fn default_thin() -> usize {
    1
}
fn default_proposal() -> ProposalKind {
    ProposalKind::RandomWalk
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
    /// Proposal scale on log u.
    #[serde(default = "default_u_step")]
    pub u_step: f64,
    /// Proposal scale on log w.
    #[serde(default = "default_w_step")]
    pub w_step: f64,
    #[serde(default = "default_proposal")]
    pub u_update: ProposalKind,
    #[serde(default = "default_proposal")]
    pub w_update: ProposalKind,
    /// Record every `thin`-th post-burn-in iteration in the trace.
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default)]
    pub w_prior: WeightPrior,
    #[serde(default)]
    pub init: PartitionInit,
}

impl SamplerConfig {
    pub fn new(iterations: usize, burn_in: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in,
            seed,
            u_step: default_u_step(),
            w_step: default_w_step(),
            u_update: ProposalKind::RandomWalk,
            w_update: ProposalKind::RandomWalk,
            thin: 1,
            w_prior: WeightPrior::default(),
            init: PartitionInit::SingleCluster,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iterations == 0 {
            return Err(ConfigError::Invalid("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(ConfigError::Invalid("burn_in must be smaller than iterations".into()));
        }
        if !(self.u_step > 0.0) || !(self.w_step > 0.0) {
            return Err(ConfigError::Invalid("proposal steps must be positive".into()));
        }
        if self.thin == 0 {
            return Err(ConfigError::Invalid("thin must be at least 1".into()));
        }
        if let PartitionInit::Random { k0 } = self.init {
            if k0 == 0 {
                return Err(ConfigError::Invalid("random init needs k0 >= 1".into()));
            }
        }
        self.w_prior.validate()
    }
}

/// Snapshot of one cluster inside a recorded sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSnapshot {
    pub atom: f64,
    pub counts: Vec<usize>,
}

/// One recorded (post-burn-in, thinned) state of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSample {
    pub iteration: usize,
    pub k: usize,
    pub u: Vec<f64>,
    /// Row-major d × R mixing weights.
    pub weights: Vec<f64>,
    pub clusters: Vec<ClusterSnapshot>,
}

/// Post-burn-in averages plus Metropolis acceptance diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub kept_iterations: usize,
    pub mean_k: f64,
    pub mean_u: Vec<f64>,
    /// Row-major d × R mean of the raw weights.
    pub mean_weights: Vec<f64>,
    /// Each group's mean weights divided by their row sum; the scale of a
    /// row is not identified, the proportions are.
    pub normalized_mean_weights: Vec<f64>,
    /// Per group, the average over iterations of the smallest row-normalized
    /// weight. Invariant under the relabeling of the underlying measures, so
    /// it detects suppression even when the suppressed column migrates.
    pub mean_min_normalized_weights: Vec<f64>,
    pub u_acceptance: f64,
    pub w_acceptance: f64,
}

/// One row of the final cluster report: conjugate posterior mean of the
/// cluster center plus per-group occupancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReportRow {
    pub cluster: usize,
    pub mean: f64,
    pub counts: Vec<usize>,
    pub percents: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub samples: Vec<ChainSample>,
    pub summary: RunSummary,
    pub cluster_table: Vec<ClusterReportRow>,
    pub final_params: LmrmParams,
    pub final_u: AuxVars,
    pub final_state: PartitionState,
}

/// Unnormalized log assignment weights of one detached observation `x`
/// from `group`: one entry per existing cluster, plus the new-cluster
/// weight. This is the reference (uncached) path; the sweep computes the
/// same quantities incrementally.
pub fn assignment_log_weights(
    state: &PartitionState,
    params: &LmrmParams,
    u: &AuxVars,
    model: &GaussianModel,
    x: f64,
    group: usize,
) -> (Vec<f64>, f64) {
    let ctx = LevyContext::new(params, u);
    let existing = state
        .clusters()
        .iter()
        .map(|c| model.log_likelihood(x, c.atom) + ctx.log_tau_ratio(&c.counts, group))
        .collect();
    let fresh = model.log_marginal(x) + ctx.log_tau_new(group);
    (existing, fresh)
}

fn sample_categorical_log<R: Rng>(log_weights: &[f64], rng: &mut R) -> usize {
    let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(m.is_finite(), "all assignment weights vanished");
    let probs: Vec<f64> = log_weights.iter().map(|&w| (w - m).exp()).collect();
    let total: f64 = probs.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (idx, &p) in probs.iter().enumerate() {
        target -= p;
        if target <= 0.0 {
            return idx;
        }
    }
    probs.len() - 1
}

/// Resamples every assignment once, groups in order and observations in
/// order within each group.
pub fn sweep_assignments<R: Rng>(
    state: &mut PartitionState,
    data: &GroupedDataset,
    params: &LmrmParams,
    u: &AuxVars,
    model: &GaussianModel,
    rng: &mut R,
) {
    let ctx = LevyContext::new(params, u);
    // per-cluster log summands of τ, kept in lockstep with the partition
    let mut terms: Vec<Vec<f64>> = state
        .clusters()
        .iter()
        .map(|c| ctx.cluster_log_terms(&c.counts))
        .collect();
    let mut log_weights: Vec<f64> = Vec::new();
    for i in 0..data.n_groups() {
        for j in 0..data.groups()[i].len() {
            let x = data.value(i, j);
            let outcome = state.detach(i, j, x);
            if outcome.removed {
                terms.swap_remove(outcome.cluster);
            } else {
                terms[outcome.cluster] = ctx.cluster_log_terms(&state.cluster(outcome.cluster).counts);
            }

            log_weights.clear();
            for (k, cluster) in state.clusters().iter().enumerate() {
                log_weights.push(
                    model.log_likelihood(x, cluster.atom)
                        + ctx.log_tau_ratio_from_terms(&terms[k], cluster.counts.total(), i),
                );
            }
            log_weights.push(model.log_marginal(x) + ctx.log_tau_new(i));

            let choice = sample_categorical_log(&log_weights, rng);
            if choice < state.n_clusters() {
                state.attach(i, j, x, AttachTarget::Existing(choice));
                terms[choice] = ctx.cluster_log_terms(&state.cluster(choice).counts);
            } else {
                let atom = model.posterior_draw(1, x, rng);
                let k = state.attach(i, j, x, AttachTarget::New { atom });
                terms.push(ctx.cluster_log_terms(&state.cluster(k).counts));
            }
        }
    }
}

/// Redraws every atom from its conjugate posterior given the cluster's
/// sufficient statistics.
pub fn sweep_atoms<R: Rng>(state: &mut PartitionState, model: &GaussianModel, rng: &mut R) {
    for k in 0..state.n_clusters() {
        let (size, sum) = (state.cluster(k).size(), state.cluster(k).sum);
        state.set_atom(k, model.posterior_draw(size, sum, rng));
    }
}

/// One Metropolis step of a scalar on its log scale. `target` must be the
/// log density of `v = log(parameter)` *including* the change-of-variable
/// Jacobian. With `grad` present the proposal is Langevin-type
/// (half-gradient drift) and the asymmetric correction is applied.
/// Returns the new value of `v` and whether the proposal was accepted.
pub fn mh_log_scale_step<R: Rng, F, G>(
    v: f64,
    step: f64,
    target: F,
    grad: Option<G>,
    rng: &mut R,
) -> (f64, bool)
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let noise: f64 = Normal::new(0.0, 1.0).unwrap().sample(rng);
    let (proposal, correction) = match &grad {
        None => (v + step * noise, 0.0),
        Some(g) => {
            let drift = 0.5 * step * step;
            let forward_mean = v + drift * g(v);
            let proposal = forward_mean + step * noise;
            let backward_mean = proposal + drift * g(proposal);
            let fwd = -(proposal - forward_mean).powi(2) / (2.0 * step * step);
            let bwd = -(v - backward_mean).powi(2) / (2.0 * step * step);
            (proposal, bwd - fwd)
        }
    };
    let log_accept = target(proposal) - target(v) + correction;
    let coin: f64 = rng.random();
    if log_accept >= 0.0 || coin.ln() < log_accept {
        (proposal, true)
    } else {
        (v, false)
    }
}

/// Componentwise Metropolis update of the auxiliary variables, targeting
/// `Σ_i (n_i−1) log u_i − ψ(u) + Σ_k log τ_{q_k}(u)`. Returns one
/// acceptance flag per component.
pub fn update_u<R: Rng>(
    params: &LmrmParams,
    u: &mut AuxVars,
    state: &PartitionState,
    config: &SamplerConfig,
    rng: &mut R,
) -> Vec<bool> {
    let counts = state.count_vectors();
    let group_sizes: Vec<usize> = (0..state.n_groups())
        .map(|i| counts.iter().map(|c| c.count(i)).sum())
        .collect();
    let mut flags = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let target = |v: f64| {
            let value = v.exp();
            if value == 0.0 || !value.is_finite() {
                return f64::NEG_INFINITY;
            }
            let mut trial = u.clone();
            trial.set(i, value);
            levy::log_joint_aux(params, &trial, &counts, &group_sizes) + v
        };
        let grad = |v: f64| {
            let value = v.exp();
            if value == 0.0 || !value.is_finite() {
                return 0.0;
            }
            let mut trial = u.clone();
            trial.set(i, value);
            levy::grad_log_joint_u(params, &trial, &counts, &group_sizes)[i] * value + 1.0
        };
        let v0 = u.get(i).ln();
        let (v1, accepted) = match config.u_update {
            ProposalKind::RandomWalk => {
                mh_log_scale_step(v0, config.u_step, target, None::<fn(f64) -> f64>, rng)
            }
            ProposalKind::GradientInformed => {
                mh_log_scale_step(v0, config.u_step, target, Some(grad), rng)
            }
        };
        u.set(i, v1.exp());
        flags.push(accepted);
    }
    flags
}

/// Componentwise Metropolis update of the mixing weights, targeting
/// `−ψ + Σ_k log τ_{q_k} + log prior(W)`. Returns one flag per entry,
/// row-major.
pub fn update_w<R: Rng>(
    params: &mut LmrmParams,
    state: &PartitionState,
    u: &AuxVars,
    config: &SamplerConfig,
    rng: &mut R,
) -> Vec<bool> {
    let counts = state.count_vectors();
    let (d, r) = (params.n_groups(), params.n_crms());
    let mut flags = Vec::with_capacity(d * r);
    for i in 0..d {
        for crm in 0..r {
            let current = params.weight(i, crm);
            let target = |v: f64| {
                let w = v.exp();
                if w == 0.0 || !w.is_finite() {
                    return f64::NEG_INFINITY;
                }
                let mut trial = params.clone();
                trial.set_weight(i, crm, w);
                let ctx = LevyContext::new(&trial, u);
                let mut value = -ctx.psi();
                for c in &counts {
                    value += ctx.log_tau(c);
                }
                value + config.w_prior.log_density(w) + v
            };
            let grad = |v: f64| {
                let w = v.exp();
                if w == 0.0 || !w.is_finite() {
                    return 0.0;
                }
                let mut trial = params.clone();
                trial.set_weight(i, crm, w);
                let g = levy::grad_log_joint_w(&trial, u, &counts)[i * r + crm];
                (g + config.w_prior.dlog_dw(w)) * w + 1.0
            };
            let v0 = current.ln();
            let (v1, accepted) = match config.w_update {
                ProposalKind::RandomWalk => {
                    mh_log_scale_step(v0, config.w_step, target, None::<fn(f64) -> f64>, rng)
                }
                ProposalKind::GradientInformed => {
                    mh_log_scale_step(v0, config.w_step, target, Some(grad), rng)
                }
            };
            params.set_weight(i, crm, v1.exp());
            flags.push(accepted);
        }
    }
    flags
}

fn snapshot(iteration: usize, state: &PartitionState, params: &LmrmParams, u: &AuxVars) -> ChainSample {
    ChainSample {
        iteration,
        k: state.n_clusters(),
        u: u.as_slice().to_vec(),
        weights: params.weights().to_vec(),
        clusters: state
            .clusters()
            .iter()
            .map(|c| ClusterSnapshot { atom: c.atom, counts: c.counts.counts().to_vec() })
            .collect(),
    }
}

/// Builds the final cluster report: posterior mean of each cluster center
/// plus per-group counts and percentages.
pub fn cluster_table(state: &PartitionState, model: &GaussianModel, data: &GroupedDataset) -> Vec<ClusterReportRow> {
    let sizes = data.group_sizes();
    state
        .clusters()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let (mean, _) = model.posterior_params(c.size(), c.sum);
            let counts: Vec<usize> = c.counts.counts().to_vec();
            let percents = counts
                .iter()
                .zip(&sizes)
                .map(|(&q, &n)| if n == 0 { 0.0 } else { 100.0 * q as f64 / n as f64 })
                .collect();
            ClusterReportRow { cluster: k + 1, mean, counts, percents }
        })
        .collect()
}

/// Runs the full sampler. Deterministic given `(data, model, params0, config)`.
pub fn run(
    data: &GroupedDataset,
    model: &GaussianModel,
    params0: LmrmParams,
    config: &SamplerConfig,
) -> Result<RunResult, ConfigError> {
    config.validate()?;
    assert_eq!(params0.n_groups(), data.n_groups(), "params and data disagree on d");
    assert!(data.n_observations() > 0, "cannot fit an empty dataset");

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = params0;
    let mut u = AuxVars::ones(data.n_groups());
    let mut state = match config.init {
        PartitionInit::SingleCluster => PartitionState::single_cluster(data),
        PartitionInit::PerGroup => PartitionState::per_group(data),
        PartitionInit::Random { k0 } => PartitionState::random(data, k0, &mut rng),
    };
    // atoms start from their conditional posterior instead of a placeholder
    sweep_atoms(&mut state, model, &mut rng);

    let mut samples = Vec::new();
    let mut kept = 0usize;
    let mut acc_k = 0.0;
    let mut acc_u = vec![0.0; data.n_groups()];
    let mut acc_w = vec![0.0; params.weights().len()];
    let mut acc_min_norm_w = vec![0.0; data.n_groups()];
    let mut u_accepted = 0usize;
    let mut u_proposed = 0usize;
    let mut w_accepted = 0usize;
    let mut w_proposed = 0usize;

    for iteration in 0..config.iterations {
        sweep_assignments(&mut state, data, &params, &u, model, &mut rng);
        sweep_atoms(&mut state, model, &mut rng);
        let uf = update_u(&params, &mut u, &state, config, &mut rng);
        u_accepted += uf.iter().filter(|&&a| a).count();
        u_proposed += uf.len();
        let wf = update_w(&mut params, &state, &u, config, &mut rng);
        w_accepted += wf.iter().filter(|&&a| a).count();
        w_proposed += wf.len();

        if iteration >= config.burn_in {
            kept += 1;
            acc_k += state.n_clusters() as f64;
            for (acc, &v) in acc_u.iter_mut().zip(u.as_slice()) {
                *acc += v;
            }
            for (acc, &v) in acc_w.iter_mut().zip(params.weights()) {
                *acc += v;
            }
            let r = params.n_crms();
            for (i, acc) in acc_min_norm_w.iter_mut().enumerate() {
                let row = &params.weights()[i * r..(i + 1) * r];
                let total: f64 = row.iter().sum();
                let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
                *acc += min / total;
            }
            if (iteration - config.burn_in) % config.thin == 0 {
                samples.push(snapshot(iteration, &state, &params, &u));
            }
        }
    }

    let mean_weights: Vec<f64> = acc_w.iter().map(|&v| v / kept as f64).collect();
    let r = params.n_crms();
    let normalized_mean_weights: Vec<f64> = mean_weights
        .chunks(r)
        .flat_map(|row| {
            let total: f64 = row.iter().sum();
            row.iter().map(move |&w| w / total).collect::<Vec<f64>>()
        })
        .collect();
    let summary = RunSummary {
        kept_iterations: kept,
        mean_k: acc_k / kept as f64,
        mean_u: acc_u.iter().map(|&v| v / kept as f64).collect(),
        mean_weights,
        normalized_mean_weights,
        mean_min_normalized_weights: acc_min_norm_w.iter().map(|&v| v / kept as f64).collect(),
        u_acceptance: u_accepted as f64 / u_proposed.max(1) as f64,
        w_acceptance: w_accepted as f64 / w_proposed.max(1) as f64,
    };
    let cluster_table = cluster_table(&state, model, data);
    Ok(RunResult {
        samples,
        summary,
        cluster_table,
        final_params: params,
        final_u: u,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny_data() -> GroupedDataset {
        GroupedDataset::from_groups(vec![vec![0.1, -0.2, 0.3], vec![5.0, 5.2]])
    }

    fn quick_config(seed: u64) -> SamplerConfig {
        SamplerConfig::new(30, 10, seed)
    }

    #[test]
    fn config_validation_catches_bad_settings() {
        let mut c = SamplerConfig::new(10, 3, 0);
        assert!(c.validate().is_ok());
        c.burn_in = 10;
        assert!(c.validate().is_err());
        c.burn_in = 0;
        c.thin = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_observation_always_occupies_one_cluster() {
        let data = GroupedDataset::from_groups(vec![vec![1.0]]);
        let model = GaussianModel::new(1.0, 0.0, 2.0);
        let params = LmrmParams::ones(1, 2, 0.5);
        let result = run(&data, &model, params, &quick_config(3)).unwrap();
        assert_eq!(result.final_state.n_clusters(), 1);
        assert!(result.samples.iter().all(|s| s.k == 1));
    }

    #[test]
    fn run_is_deterministic_given_seed() {
        let data = tiny_data();
        let model = GaussianModel::new(1.0, 0.0, 2.6);
        let params = LmrmParams::ones(2, 2, 0.1);
        let a = run(&data, &model, params.clone(), &quick_config(11)).unwrap();
        let b = run(&data, &model, params, &quick_config(11)).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn one_kept_iteration_yields_single_sample_summary() {
        let data = tiny_data();
        let model = GaussianModel::new(1.0, 0.0, 2.6);
        let params = LmrmParams::ones(2, 2, 0.1);
        let mut config = SamplerConfig::new(6, 5, 2);
        config.thin = 1;
        let result = run(&data, &model, params, &config).unwrap();
        assert_eq!(result.summary.kept_iterations, 1);
        assert_eq!(result.samples.len(), 1);
        assert_eq!(result.summary.mean_k, result.samples[0].k as f64);
    }

    #[test]
    fn state_stays_consistent_through_sweeps() {
        let data = tiny_data();
        let model = GaussianModel::new(1.0, 0.0, 2.6);
        let params = LmrmParams::ones(2, 3, 0.3);
        let result = run(&data, &model, params, &quick_config(7)).unwrap();
        assert!(result.final_state.recount(&data).is_clean());
        let sizes = data.group_sizes();
        for i in 0..2 {
            let total: usize = result.final_state.clusters().iter().map(|c| c.counts.count(i)).sum();
            assert_eq!(total, sizes[i]);
        }
    }

    #[test]
    fn cluster_table_percentages_sum_to_hundred() {
        let data = tiny_data();
        let model = GaussianModel::new(1.0, 0.0, 2.6);
        let params = LmrmParams::ones(2, 2, 0.2);
        let result = run(&data, &model, params, &quick_config(19)).unwrap();
        for i in 0..2 {
            let total: f64 = result.cluster_table.iter().map(|row| row.percents[i]).sum();
            assert_relative_eq!(total, 100.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn log_shift_invariance_of_acceptance_decisions() {
        use rand::SeedableRng;
        let base = |v: f64| -0.5 * v * v;
        let shifted = |v: f64| -0.5 * v * v + 123.456;
        let mut rng1 = ChaCha8Rng::seed_from_u64(99);
        let mut rng2 = ChaCha8Rng::seed_from_u64(99);
        let mut v1 = 0.2;
        let mut v2 = 0.2;
        for _ in 0..500 {
            let (n1, a1) = mh_log_scale_step(v1, 0.7, base, None::<fn(f64) -> f64>, &mut rng1);
            let (n2, a2) = mh_log_scale_step(v2, 0.7, shifted, None::<fn(f64) -> f64>, &mut rng2);
            assert_eq!(a1, a2);
            assert_eq!(n1, n2);
            v1 = n1;
            v2 = n2;
        }
    }

    #[test]
    fn zero_step_limit_keeps_values_and_accepts() {
        // a vanishing proposal scale accepts (log ratio → 0) and moves nowhere
        let data = tiny_data();
        let model = GaussianModel::new(1.0, 0.0, 2.6);
        let params = LmrmParams::ones(2, 2, 0.2);
        let mut config = quick_config(5);
        config.u_step = 1e-12;
        config.w_step = 1e-12;
        let result = run(&data, &model, params, &config).unwrap();
        assert!(result.summary.u_acceptance > 0.999);
        assert!(result.summary.w_acceptance > 0.999);
        for (&w, &w0) in result.final_params.weights().iter().zip(&vec![1.0; 4]) {
            assert_relative_eq!(w, w0, epsilon = 1e-6);
        }
    }

    #[test]
    fn far_separated_groups_split_into_two_clusters() {
        // gap of 100σ between the groups and a minuscule α: K = 2 after a
        // few sweeps, for every seed we try
        for seed in 0..5u64 {
            let data = GroupedDataset::from_groups(vec![
                (0..20).map(|i| 0.01 * i as f64).collect(),
                (0..20).map(|i| 100.0 + 0.01 * i as f64).collect(),
            ]);
            let model = GaussianModel::new(1.0, 50.0, 60.0);
            let params = LmrmParams::ones(2, 2, 1e-6);
            let config = SamplerConfig::new(50, 49, seed);
            let result = run(&data, &model, params, &config).unwrap();
            assert_eq!(result.final_state.n_clusters(), 2, "seed {seed}");
        }
    }

    #[test]
    fn atom_sweep_with_no_clusters_is_a_noop() {
        let data = GroupedDataset::from_groups(vec![vec![1.0]]);
        let model = GaussianModel::new(1.0, 0.0, 1.0);
        let mut state = PartitionState::single_cluster(&data);
        state.detach(0, 0, 1.0);
        assert_eq!(state.n_clusters(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let before = rng.clone();
        sweep_atoms(&mut state, &model, &mut rng);
        // no clusters: nothing drawn, generator untouched
        assert_eq!(rng, before);
    }

    #[test]
    fn atoms_of_disjoint_clusters_are_uncorrelated() {
        let data = GroupedDataset::from_groups(vec![vec![0.0, 0.1], vec![10.0, 10.1]]);
        let model = GaussianModel::new(1.0, 5.0, 10.0);
        let mut state = PartitionState::per_group(&data);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for _ in 0..10_000 {
            sweep_atoms(&mut state, &model, &mut rng);
            a.push(state.cluster(0).atom);
            b.push(state.cluster(1).atom);
        }
        let ma = crate::math::mean(&a);
        let mb = crate::math::mean(&b);
        let cov: f64 =
            a.iter().zip(&b).map(|(&x, &y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64;
        let corr = cov / (crate::math::variance(&a) * crate::math::variance(&b)).sqrt();
        assert!(corr.abs() < 0.05, "corr = {corr}");
    }
}
