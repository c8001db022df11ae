//! File formats written by `fit`: the thinned chain trace, the post
//! burn-in summary, the final cluster table, and the reproducibility
//! manifest. All floats use Rust's shortest round-trip formatting so
//! identical runs produce identical bytes.

use lmrm::gibbs::{ChainSample, ClusterReportRow, RunResult, SamplerConfig};
use lmrm::math::effective_sample_size;
use serde::Serialize;
use std::fmt::Write as _;

/// Trace header `iter,K,u_1..u_d,w_1_1..w_d_R` followed by one row per
/// recorded sample.
pub fn trace_csv(samples: &[ChainSample], d: usize, r: usize) -> String {
    let mut header = String::from("iter,K");
    for i in 1..=d {
        let _ = write!(header, ",u_{i}");
    }
    for i in 1..=d {
        for j in 1..=r {
            let _ = write!(header, ",w_{i}_{j}");
        }
    }
    header.push('\n');
    let mut out = header;
    for s in samples {
        let _ = write!(out, "{},{}", s.iteration, s.k);
        for v in &s.u {
            let _ = write!(out, ",{v}");
        }
        for v in &s.weights {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// `key,value` summary of the post burn-in averages.
pub fn summary_csv(result: &RunResult, d: usize, r: usize) -> String {
    let s = &result.summary;
    let mut out = String::from("key,value\n");
    let _ = writeln!(out, "kept_iterations,{}", s.kept_iterations);
    let _ = writeln!(out, "mean_k,{}", s.mean_k);
    let k_series: Vec<f64> = result.samples.iter().map(|c| c.k as f64).collect();
    let _ = writeln!(out, "ess_k,{}", effective_sample_size(&k_series));
    for i in 0..d {
        let _ = writeln!(out, "mean_u_{},{}", i + 1, s.mean_u[i]);
    }
    for i in 0..d {
        for j in 0..r {
            let _ = writeln!(out, "mean_w_{}_{},{}", i + 1, j + 1, s.mean_weights[i * r + j]);
        }
    }
    for i in 0..d {
        for j in 0..r {
            let _ = writeln!(
                out,
                "norm_w_{}_{},{}",
                i + 1,
                j + 1,
                s.normalized_mean_weights[i * r + j]
            );
        }
    }
    for i in 0..d {
        let _ = writeln!(out, "min_norm_w_g{},{}", i + 1, s.mean_min_normalized_weights[i]);
    }
    let _ = writeln!(out, "u_acceptance,{}", s.u_acceptance);
    let _ = writeln!(out, "w_acceptance,{}", s.w_acceptance);
    out
}

/// Cluster table `cluster,mean,count_g1,pct_g1,...` from the final state.
pub fn clusters_csv(rows: &[ClusterReportRow], d: usize) -> String {
    let mut header = String::from("cluster,mean");
    for i in 1..=d {
        let _ = write!(header, ",count_g{i},pct_g{i}");
    }
    header.push('\n');
    let mut out = header;
    for row in rows {
        let _ = write!(out, "{},{}", row.cluster, row.mean);
        for i in 0..d {
            let _ = write!(out, ",{},{:.2}", row.counts[i], row.percents[i]);
        }
        out.push('\n');
    }
    out
}

/// Everything needed to reproduce a fit byte for byte.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub data_sha256: String,
    pub data_path: String,
    pub seed: u64,
    pub chains: usize,
    pub r: usize,
    pub alpha: f64,
    pub sampler: SamplerConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}
