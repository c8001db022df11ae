//! Runnable validation suites: each check compares an implementation path
//! against an independent oracle (quadrature of a defining integral, the
//! Ewens formula, finite differences, or direct simulation of the random
//! measures) and reports a metric against its threshold.

use crate::eppf::{
    all_set_partitions, ewens_log_eppf, log_eppf, mc_partition_probs, eppf_consistency_check,
    PartitionSpec, QuadratureSettings,
};
use crate::levy::{self, AuxVars, ClusterCounts, LmrmParams};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of whatever the check measures.
    pub metric: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, metric: f64, threshold: f64, detail: String) -> Self {
        Self { name: name.to_string(), passed: metric <= threshold, metric, threshold, detail }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("suite,check,status,metric,threshold,detail\n");
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{},{},{},{:e},{:e},{}",
                self.suite,
                c.name,
                status,
                c.metric,
                c.threshold,
                c.detail.replace(',', ";")
            );
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "FAIL" };
            let _ = writeln!(
                out,
                "[{}] {:<40} {}  (metric {:.3e}, threshold {:.0e})",
                self.suite, c.name, status, c.metric, c.threshold
            );
        }
        out
    }
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    d: usize,
    r: usize,
    max_q: usize,
) -> (LmrmParams, AuxVars, ClusterCounts) {
    let alpha = rng.random_range(0.2..3.0);
    let weights: Vec<f64> = (0..d * r).map(|_| rng.random_range(0.05..4.0)).collect();
    let params = LmrmParams::new(d, r, alpha, weights);
    let u = AuxVars::new((0..d).map(|_| rng.random_range(0.05..5.0)).collect());
    let mut q: Vec<usize> = (0..d).map(|_| rng.random_range(0..=max_q)).collect();
    if q.iter().all(|&x| x == 0) {
        q[0] = 1;
    }
    (params, u, ClusterCounts::new(q))
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
    force: usize,
) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    let whole = simpson(f, a, b);
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    if depth == 0 || (force == 0 && (left + right - whole).abs() <= 15.0 * tol) {
        left + right + (left + right - whole) / 15.0
    } else {
        let force = force.saturating_sub(1);
        adaptive_simpson(f, a, m, tol / 2.0, depth - 1, force)
            + adaptive_simpson(f, m, b, tol / 2.0, depth - 1, force)
    }
}

/// Lévy-functional checks: the stable τ-ratio against direct differences,
/// α and column-permutation symmetries, and ψ/τ against quadrature of
/// their defining one-dimensional Gamma integrals.
pub fn suite_levy(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    // 1. ratio vs difference of log τ, 500 instances, t ≤ 50
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let d = rng.random_range(1..=3);
        let r = rng.random_range(1..=3);
        let (params, u, counts) = random_instance(&mut rng, d, r, 50 / d);
        for i in 0..d {
            let diff = levy::log_tau(&params, &u, &counts.plus(i)) - levy::log_tau(&params, &u, &counts);
            let ratio = levy::log_tau_ratio(&params, &u, &counts, i);
            worst = worst.max((ratio - diff).abs() / diff.abs().max(1.0));
        }
    }
    checks.push(CheckOutcome::new(
        "tau_ratio_vs_difference_t50",
        worst,
        1e-10,
        "500 random instances".into(),
    ));

    // 2. finiteness at t = 10^4 where the per-CRM summands of τ underflow
    // (weights capped at 1 so the w^q factors cannot mask the underflow)
    let mut worst = 0.0;
    for _ in 0..20 {
        let weights: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..1.0)).collect();
        let params = LmrmParams::new(2, 3, rng.random_range(0.2..3.0), weights);
        let u = AuxVars::new(vec![rng.random_range(0.8..2.0), rng.random_range(0.8..2.0)]);
        let counts = ClusterCounts::new(vec![5_000, 5_000]);
        let ctx = levy::LevyContext::new(&params, &u);
        let underflowed = ctx.cluster_log_terms(&counts).iter().all(|&t| t.exp() == 0.0);
        let finite = levy::log_tau_ratio(&params, &u, &counts, 0).is_finite();
        if !(underflowed && finite) {
            worst = 1.0;
        }
    }
    checks.push(CheckOutcome::new(
        "tau_ratio_finite_at_t1e4",
        worst,
        0.0,
        "direct form underflows, ratio stays finite".into(),
    ));

    // 3. α cancels in ratios; ψ and τ scale linearly in α
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (params, u, counts) = random_instance(&mut rng, 2, 2, 6);
        let scaled = LmrmParams::new(2, 2, params.alpha() * 3.7, params.weights().to_vec());
        for i in 0..2 {
            let a = levy::log_tau_ratio(&params, &u, &counts, i);
            let b = levy::log_tau_ratio(&scaled, &u, &counts, i);
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
        let shift = levy::log_tau(&scaled, &u, &counts) - levy::log_tau(&params, &u, &counts);
        worst = worst.max((shift - 3.7f64.ln()).abs());
        let ratio = levy::psi(&scaled, &u) / levy::psi(&params, &u);
        worst = worst.max((ratio - 3.7).abs() / 3.7);
    }
    checks.push(CheckOutcome::new("alpha_scaling", worst, 1e-11, "50 random instances".into()));

    // 4. permuting CRM columns changes nothing
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (params, u, counts) = random_instance(&mut rng, 2, 3, 6);
        let permuted = params.permute_crms(&[2, 0, 1]);
        worst = worst.max(
            (levy::log_tau(&params, &u, &counts) - levy::log_tau(&permuted, &u, &counts)).abs(),
        );
        worst = worst.max((levy::psi(&params, &u) - levy::psi(&permuted, &u)).abs());
    }
    checks.push(CheckOutcome::new("crm_permutation_invariance", worst, 1e-11, "50 instances".into()));

    // 5. ψ and τ against quadrature of their defining integrals
    let mut worst: f64 = 0.0;
    for _ in 0..15 {
        let d = rng.random_range(1..=2);
        let r = rng.random_range(1..=3);
        let (params, u, counts) = random_instance(&mut rng, d, r, 5 / d);
        let h = levy::h_vector(&params, &u);
        let psi_quad: f64 = h
            .iter()
            .map(|&hr| {
                params.alpha()
                    * adaptive_simpson(
                        &|s: f64| if s == 0.0 { hr } else { (-(-hr * s).exp_m1()) / s * (-s).exp() },
                        0.0,
                        60.0 + 10.0 * hr.ln_1p(),
                        1e-12,
                        40,
                        8,
                    )
            })
            .sum();
        worst = worst.max((levy::psi(&params, &u) - psi_quad).abs());
        let t = counts.total() as i32;
        let tau_quad: f64 = (0..r)
            .map(|rr| {
                let mut w_pow = 1.0;
                for i in 0..d {
                    w_pow *= params.weight(i, rr).powi(counts.count(i) as i32);
                }
                let rate = h[rr] + 1.0;
                let cut = (t as f64 + 40.0 * (t as f64).sqrt() + 80.0) / rate;
                params.alpha()
                    * w_pow
                    * adaptive_simpson(
                        &|s: f64| s.powi(t - 1) * (-rate * s).exp(),
                        0.0,
                        cut,
                        1e-13,
                        40,
                        10,
                    )
            })
            .sum();
        worst = worst.max((levy::log_tau(&params, &u, &counts).exp() - tau_quad).abs());
    }
    checks.push(CheckOutcome::new("psi_tau_defining_integrals", worst, 1e-8, "15 instances".into()));

    // 6. ψ monotone in every coordinate, ψ(0) = 0
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let (params, u, _) = random_instance(&mut rng, 2, 2, 1);
        let base = levy::psi(&params, &u);
        for i in 0..2 {
            let mut bigger = u.clone();
            bigger.set(i, u.get(i) * 1.5);
            worst = worst.max((base - levy::psi(&params, &bigger)).max(0.0));
        }
        let zeroish = AuxVars::new(vec![1e-300; 2]);
        worst = worst.max(levy::psi(&params, &zeroish).abs());
    }
    checks.push(CheckOutcome::new("psi_monotone_and_zero_at_origin", worst, 1e-12, "30 instances".into()));

    SuiteReport { suite: "levy".into(), checks }
}

/// Gradients of the auxiliary-variable and weight objectives against
/// central finite differences on the log scale (step 1e-6).
pub fn suite_gradients(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let eps = 1e-6;

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let r = rng.random_range(1..=3);
        let (params, u, c1) = random_instance(&mut rng, d, r, 5);
        let c2 = ClusterCounts::singleton(d, rng.random_range(0..d));
        let counts = vec![c1.clone(), c2.clone()];
        let n: Vec<usize> = (0..d).map(|i| c1.count(i) + c2.count(i)).collect();
        let grad = levy::grad_log_joint_u(&params, &u, &counts, &n);
        for i in 0..d {
            let mut up = u.clone();
            up.set(i, (u.get(i).ln() + eps).exp());
            let mut dn = u.clone();
            dn.set(i, (u.get(i).ln() - eps).exp());
            let fd = (levy::log_joint_aux(&params, &up, &counts, &n)
                - levy::log_joint_aux(&params, &dn, &counts, &n))
                / (2.0 * eps);
            let analytic = grad[i] * u.get(i);
            worst = worst.max((analytic - fd).abs() / fd.abs().max(1e-4));
        }
    }
    checks.push(CheckOutcome::new("grad_u_vs_central_differences", worst, 1e-5, "100 instances".into()));

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let r = rng.random_range(1..=3);
        let (params, u, c1) = random_instance(&mut rng, d, r, 5);
        let c2 = ClusterCounts::singleton(d, rng.random_range(0..d));
        let counts = vec![c1, c2];
        let objective = |p: &LmrmParams| -> f64 {
            -levy::psi(p, &u) + counts.iter().map(|c| levy::log_tau(p, &u, c)).sum::<f64>()
        };
        let grad = levy::grad_log_joint_w(&params, &u, &counts);
        for i in 0..d {
            for rr in 0..r {
                let w = params.weight(i, rr);
                let mut up = params.clone();
                up.set_weight(i, rr, (w.ln() + eps).exp());
                let mut dn = params.clone();
                dn.set_weight(i, rr, (w.ln() - eps).exp());
                let fd = (objective(&up) - objective(&dn)) / (2.0 * eps);
                let analytic = grad[i * r + rr] * w;
                worst = worst.max((analytic - fd).abs() / fd.abs().max(1e-4));
            }
        }
    }
    checks.push(CheckOutcome::new("grad_w_vs_central_differences", worst, 1e-5, "100 instances".into()));

    SuiteReport { suite: "gradients".into(), checks }
}

/// Partition-probability checks: the Ewens reduction over every partition
/// of up to six observations, additivity of the EPPF, and quadrature
/// stability under refinement.
pub fn suite_eppf(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let settings = QuadratureSettings::default();

    // 1. Ewens equivalence for d = 1, R = 1, α ∈ {0.5, 1, 2}, n ≤ 6
    let mut worst: f64 = 0.0;
    let mut evaluated = 0usize;
    for &alpha in &[0.5, 1.0, 2.0] {
        let params = LmrmParams::ones(1, 1, alpha);
        for n in 1..=6usize {
            let mut seen = BTreeMap::new();
            for rgs in all_set_partitions(n) {
                let spec = PartitionSpec::from_rgs(&rgs, &[n]).unwrap();
                seen.entry(spec.canonical_structure()).or_insert(spec);
            }
            for spec in seen.values() {
                let quad = log_eppf(&params, spec, &settings).unwrap();
                let exact = ewens_log_eppf(alpha, spec).unwrap();
                worst = worst.max((quad - exact).abs());
                evaluated += 1;
            }
        }
    }
    checks.push(CheckOutcome::new(
        "ewens_equivalence_n6",
        worst,
        1e-6,
        format!("{evaluated} partition structures x 3 alphas"),
    ));

    // 2. additivity in the single-group case (Ewens identity)
    let spec = PartitionSpec::new(
        vec![ClusterCounts::new(vec![2]), ClusterCounts::new(vec![1])],
        vec![3],
    )
    .unwrap();
    let tight = QuadratureSettings { tolerance: 1e-12, ..settings };
    let residuals =
        eppf_consistency_check(&LmrmParams::ones(1, 1, 1.0), &spec, &tight).unwrap();
    checks.push(CheckOutcome::new(
        "consistency_single_group",
        residuals[0],
        1e-10,
        "blocks {2,1}, alpha 1".into(),
    ));

    // 3. additivity for two groups and three CRMs
    let weights: Vec<f64> = (0..6).map(|_| rng.random_range(0.3..2.0)).collect();
    let params = LmrmParams::new(2, 3, 0.9, weights);
    let spec = PartitionSpec::new(
        vec![ClusterCounts::new(vec![1, 1]), ClusterCounts::new(vec![1, 0])],
        vec![2, 1],
    )
    .unwrap();
    let worst_residual = eppf_consistency_check(&params, &spec, &settings)
        .unwrap()
        .into_iter()
        .fold(0.0f64, f64::max);
    checks.push(CheckOutcome::new(
        "consistency_two_groups",
        worst_residual,
        1e-6,
        "d=2 R=3 random weights".into(),
    ));

    // 4. cluster-label permutation invariance
    let spec_a = PartitionSpec::new(
        vec![ClusterCounts::new(vec![2, 0]), ClusterCounts::new(vec![0, 1])],
        vec![2, 1],
    )
    .unwrap();
    let spec_b = PartitionSpec::new(
        vec![ClusterCounts::new(vec![0, 1]), ClusterCounts::new(vec![2, 0])],
        vec![2, 1],
    )
    .unwrap();
    let diff = (log_eppf(&params, &spec_a, &settings).unwrap()
        - log_eppf(&params, &spec_b, &settings).unwrap())
    .abs();
    checks.push(CheckOutcome::new("label_permutation_invariance", diff, 1e-9, String::new()));

    // 5. refinement stability: tighter tolerance moves the answer < 1e-8
    let loose = log_eppf(&params, &spec_a, &settings).unwrap();
    let tight_v = log_eppf(
        &params,
        &spec_a,
        &QuadratureSettings { tolerance: 1e-12, ..settings },
    )
    .unwrap();
    checks.push(CheckOutcome::new("node_doubling_stability", (loose - tight_v).abs(), 1e-8, String::new()));

    SuiteReport { suite: "eppf".into(), checks }
}

/// Simulation oracle: partition frequencies from truncated stick-breaking
/// CRMs against the quadrature EPPF.
pub fn suite_oracle(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    // 1. two observations from a DP(1): shared cluster with probability 1/2
    let params = LmrmParams::ones(1, 1, 1.0);
    let draws = 100_000;
    let probs = mc_partition_probs(&params, &[2], 10_000, draws, &mut rng);
    let same = probs.get(&vec![0u8, 0]).map(|e| e.probability).unwrap_or(0.0);
    let se = (0.5f64 * 0.5 / draws as f64).sqrt();
    checks.push(CheckOutcome::new(
        "dp_pair_probability",
        (same - 0.5).abs(),
        3.0 * se,
        format!("{draws} draws"),
    ));

    // 2. completeness: the tallied frequencies sum to one
    let params2 = LmrmParams::new(2, 2, 0.8, vec![1.0, 0.3, 0.4, 1.2]);
    let probs = mc_partition_probs(&params2, &[1, 1], 10_000, 20_000, &mut rng);
    let total: f64 = probs.values().map(|e| e.probability).sum();
    checks.push(CheckOutcome::new("mc_completeness", (total - 1.0).abs(), 1e-12, String::new()));

    // 3. full comparison: d=2, R=2, fixed random W, n=(2,1)
    let weights: Vec<f64> = (0..4).map(|_| rng.random_range(0.3..2.0)).collect();
    let params3 = LmrmParams::new(2, 2, 1.0, weights);
    let draws = 200_000;
    let probs = mc_partition_probs(&params3, &[2, 1], 10_000, draws, &mut rng);
    let settings = QuadratureSettings::default();
    let mut worst_z: f64 = 0.0;
    let mut detail = String::new();
    for rgs in all_set_partitions(3) {
        let spec = PartitionSpec::from_rgs(&rgs, &[2, 1]).unwrap();
        let p = log_eppf(&params3, &spec, &settings).unwrap().exp();
        let observed = probs.get(&rgs).map(|e| e.probability).unwrap_or(0.0);
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let z = (observed - p).abs() / se;
        worst_z = worst_z.max(z);
        let _ = write!(detail, "{rgs:?}: mc {observed:.5} vs quad {p:.5}; ");
    }
    checks.push(CheckOutcome::new("mc_vs_quadrature_partitions", worst_z, 3.0, detail));

    SuiteReport { suite: "oracle".into(), checks }
}

/// Dispatch by suite name; `None` for an unknown name.
pub fn run_suite(name: &str, seed: u64) -> Option<SuiteReport> {
    match name {
        "levy" => Some(suite_levy(seed)),
        "gradients" => Some(suite_gradients(seed)),
        "eppf" => Some(suite_eppf(seed)),
        "oracle" => Some(suite_oracle(seed)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levy_suite_passes() {
        let report = suite_levy(1);
        assert!(report.passed(), "\n{}", report.render_text());
    }

    #[test]
    fn gradient_suite_passes() {
        let report = suite_gradients(2);
        assert!(report.passed(), "\n{}", report.render_text());
    }

    #[test]
    fn unknown_suite_is_none() {
        assert!(run_suite("nope", 0).is_none());
    }

    #[test]
    fn report_renders_csv_with_status_column() {
        let report = SuiteReport {
            suite: "demo".into(),
            checks: vec![CheckOutcome::new("x", 0.0, 1.0, "ok".into())],
        };
        let csv = report.to_csv();
        assert!(csv.starts_with("suite,check,status"));
        assert!(csv.contains("demo,x,pass"));
    }
}
