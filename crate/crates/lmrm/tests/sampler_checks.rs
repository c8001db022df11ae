//! Cross-module checks of the sampler: the single-CRM reduction to the
//! Dirichlet-process updates, assignment weights against a from-scratch
//! evaluation of the predictive τ-ratios, and the stationary laws of the
//! Metropolis updates against quadrature.

use lmrm::data::GroupedDataset;
use lmrm::gaussian::GaussianModel;
use lmrm::gibbs::{
    self, assignment_log_weights, update_u, update_w, ProposalKind, SamplerConfig,
};
use lmrm::levy::{AuxVars, ClusterCounts, LmrmParams};
use lmrm::math::{effective_sample_size, log_sum_exp, mean, variance};
use lmrm::partition::PartitionState;
use lmrm::quadrature::GaussLaguerre;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

/// Plain-arithmetic τ from its Gamma closed form, no log-sum-exp.
fn tau_direct(params: &LmrmParams, u: &AuxVars, counts: &ClusterCounts) -> f64 {
    let r = params.n_crms();
    let d = params.n_groups();
    let mut h = vec![0.0; r];
    for rr in 0..r {
        for i in 0..d {
            h[rr] += params.weight(i, rr) * u.get(i);
        }
    }
    let t = counts.total();
    let mut sum = 0.0;
    for rr in 0..r {
        let mut term = (h[rr] + 1.0).powi(-(t as i32));
        for i in 0..d {
            term *= params.weight(i, rr).powi(counts.count(i) as i32);
        }
        sum += term;
    }
    params.alpha() * ln_gamma(t as f64).exp() * sum
}

fn random_state(rng: &mut ChaCha8Rng) -> (GroupedDataset, PartitionState) {
    let data = GroupedDataset::from_groups(vec![
        (0..6).map(|_| rng.random_range(-3.0..3.0)).collect(),
        (0..5).map(|_| rng.random_range(-3.0..3.0)).collect(),
    ]);
    let mut state = PartitionState::random(&data, 3, rng);
    for k in 0..state.n_clusters() {
        let atom = rng.random_range(-2.0..2.0);
        state.set_atom(k, atom);
    }
    (data, state)
}

#[test]
fn assignment_weights_match_direct_tau_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let model = GaussianModel::new(1.0, 0.0, 2.0);
    for _ in 0..25 {
        let (_, state) = random_state(&mut rng);
        let weights: Vec<f64> = (0..6).map(|_| rng.random_range(0.3..2.0)).collect();
        let params = LmrmParams::new(2, 3, rng.random_range(0.1..2.0), weights);
        let u = AuxVars::new(vec![rng.random_range(0.3..2.0), rng.random_range(0.3..2.0)]);
        let x = rng.random_range(-3.0..3.0);
        for group in 0..2 {
            let (existing, fresh) = assignment_log_weights(&state, &params, &u, &model, x, group);
            for (k, cluster) in state.clusters().iter().enumerate() {
                let ratio =
                    tau_direct(&params, &u, &cluster.counts.plus(group)) / tau_direct(&params, &u, &cluster.counts);
                let expect = model.log_likelihood(x, cluster.atom) + ratio.ln();
                assert!(
                    (existing[k] - expect).abs() <= 1e-10 * expect.abs().max(1.0),
                    "cluster {k}: {} vs {expect}",
                    existing[k]
                );
            }
            let delta = ClusterCounts::singleton(2, group);
            let expect = model.log_marginal(x) + tau_direct(&params, &u, &delta).ln();
            assert!((fresh - expect).abs() <= 1e-10 * expect.abs().max(1.0));
        }
    }
}

#[test]
fn single_crm_reduces_to_dirichlet_process_updates() {
    // with R = 1 the common factor w_i/(h+1) cancels and the normalized
    // assignment probabilities are exactly CRP-with-likelihood
    let mut rng = ChaCha8Rng::seed_from_u64(57);
    let model = GaussianModel::new(1.0, 0.0, 2.6);
    for _ in 0..25 {
        let (_, state) = random_state(&mut rng);
        let alpha = rng.random_range(0.05..2.0);
        let params = LmrmParams::new(2, 1, alpha, vec![rng.random_range(0.2..3.0), rng.random_range(0.2..3.0)]);
        let u = AuxVars::new(vec![rng.random_range(0.2..3.0), rng.random_range(0.2..3.0)]);
        let x = rng.random_range(-3.0..3.0);
        for group in 0..2 {
            let (mut log_w, log_new) = assignment_log_weights(&state, &params, &u, &model, x, group);
            log_w.push(log_new);
            let z = log_sum_exp(&log_w);
            let probs: Vec<f64> = log_w.iter().map(|&w| (w - z).exp()).collect();

            let mut crp: Vec<f64> = state
                .clusters()
                .iter()
                .map(|c| c.counts.total() as f64 * model.log_likelihood(x, c.atom).exp())
                .collect();
            crp.push(alpha * model.log_marginal(x).exp());
            let total: f64 = crp.iter().sum();
            for (p, c) in probs.iter().zip(&crp) {
                assert!((p - c / total).abs() < 1e-12, "{p} vs {}", c / total);
            }
        }
    }
}

/// Batch-means standard error of the mean of a correlated chain.
fn batch_se(chain: &[f64]) -> f64 {
    let batches = 50;
    let size = chain.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| mean(&chain[b * size..(b + 1) * size]))
        .collect();
    (variance(&means) / batches as f64).sqrt()
}

/// One observation, one cluster, d = R = w = α = 1: the auxiliary variable
/// has density ∝ e^{-ψ(u)} τ_{(1)}(u) = (1+u)^{-2}, so E[1/(1+u)] = 1/2
/// and E[1/(1+u)²] = 1/3 (by quadrature of the normalized target).
fn run_u_chain(kind: ProposalKind, step: f64, steps: usize, seed: u64) -> Vec<f64> {
    let data = GroupedDataset::from_groups(vec![vec![0.3]]);
    let params = LmrmParams::ones(1, 1, 1.0);
    let state = PartitionState::single_cluster(&data);
    let mut config = SamplerConfig::new(10, 1, seed);
    config.u_update = kind;
    config.u_step = step;
    let mut u = AuxVars::ones(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(steps);
    for _ in 0..steps {
        update_u(&params, &mut u, &state, &config, &mut rng);
        values.push(1.0 / (1.0 + u.get(0)));
    }
    values
}

#[test]
fn update_u_reaches_its_quadrature_checked_stationary_law() {
    for (kind, step, seed) in [
        (ProposalKind::RandomWalk, 0.9, 101u64),
        (ProposalKind::GradientInformed, 0.7, 102),
    ] {
        let chain = run_u_chain(kind, step, 150_000, seed);
        let kept = &chain[10_000..];
        let m = mean(kept);
        let se = batch_se(kept);
        assert!(
            (m - 0.5).abs() < 3.0 * se + 1e-4,
            "{kind:?}: E[1/(1+u)] = {m} (se {se})"
        );
        let second: Vec<f64> = kept.iter().map(|&v| v * v).collect();
        let m2 = mean(&second);
        let se2 = batch_se(&second);
        assert!(
            (m2 - 1.0 / 3.0).abs() < 3.0 * se2 + 1e-4,
            "{kind:?}: E[1/(1+u)²] = {m2} (se {se2})"
        );
    }
}

#[test]
fn update_u_histogram_is_stable_across_doubled_chain_length() {
    let chain = run_u_chain(ProposalKind::RandomWalk, 0.9, 200_000, 103);
    let hist = |values: &[f64]| -> Vec<f64> {
        let mut bins = vec![0.0; 20];
        for &v in values {
            let b = ((v * 20.0) as usize).min(19);
            bins[b] += 1.0 / values.len() as f64;
        }
        bins
    };
    let half = hist(&chain[..100_000]);
    let full = hist(&chain);
    let tv: f64 = half.iter().zip(&full).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.02, "total-variation drift {tv}");
}

/// No clusters, exponential(1) prior, u = 1, d = R = α = 1: the weight has
/// density ∝ e^{-w}/(1+w); its moments come from one-dimensional
/// Gauss–Laguerre quadrature.
#[test]
fn update_w_matches_prior_tilted_quadrature_moments() {
    let rule = GaussLaguerre::new(120, 0.0);
    let denominator = rule.integrate(|w| 1.0 / (1.0 + w));
    let expect = rule.integrate(|w| 1.0 / ((1.0 + w) * (1.0 + w))) / denominator;

    for (kind, step, seed) in [
        (ProposalKind::RandomWalk, 1.2, 201u64),
        (ProposalKind::GradientInformed, 0.9, 202),
    ] {
        let data = GroupedDataset::from_groups(vec![vec![0.0]]);
        let mut state = PartitionState::single_cluster(&data);
        state.detach(0, 0, 0.0); // leave no occupied clusters
        let mut params = LmrmParams::ones(1, 1, 1.0);
        let u = AuxVars::ones(1);
        let mut config = SamplerConfig::new(10, 1, seed);
        config.w_update = kind;
        config.w_step = step;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::new();
        for _ in 0..150_000 {
            update_w(&mut params, &state, &u, &config, &mut rng);
            values.push(1.0 / (1.0 + params.weight(0, 0)));
        }
        let kept = &values[10_000..];
        let m = mean(kept);
        let se = batch_se(kept);
        assert!(
            (m - expect).abs() < 3.0 * se + 1e-4,
            "{kind:?}: E[1/(1+w)] = {m} vs {expect} (se {se})"
        );
    }
}

#[test]
fn permuting_crm_columns_gives_an_equivalent_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let data = GroupedDataset::from_groups(vec![
        (0..20).map(|_| rng.random_range(-1.5..1.5)).collect(),
        (0..20).map(|_| 5.0 + rng.random_range(-1.5..1.5)).collect(),
    ]);
    let model = GaussianModel::new(1.0, 2.5, 3.0);
    let params_a = LmrmParams::new(2, 2, 0.05, vec![1.0, 2.0, 1.0, 2.0]);
    let params_b = params_a.permute_crms(&[1, 0]);

    let mut config = SamplerConfig::new(4000, 1000, 11);
    let a = gibbs::run(&data, &model, params_a, &config).unwrap();
    config.seed = 12;
    let b = gibbs::run(&data, &model, params_b, &config).unwrap();

    let ks_a: Vec<f64> = a.samples.iter().map(|s| s.k as f64).collect();
    let ks_b: Vec<f64> = b.samples.iter().map(|s| s.k as f64).collect();
    let se = |ks: &[f64]| (variance(ks) / effective_sample_size(ks)).sqrt();
    let z = (a.summary.mean_k - b.summary.mean_k).abs()
        / (se(&ks_a).powi(2) + se(&ks_b).powi(2)).sqrt().max(1e-9);
    assert!(
        z < 5.0 || (a.summary.mean_k - b.summary.mean_k).abs() < 0.3,
        "mean K {} vs {} (z = {z:.2})",
        a.summary.mean_k,
        b.summary.mean_k
    );
}
