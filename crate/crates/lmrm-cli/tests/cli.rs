//! End-to-end behavior of the binary: file outputs, determinism, exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lmrm")
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lmrm_cli_{}_{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

fn small_config(sizes: (usize, usize), iterations: usize, burn_in: usize, seed: u64) -> String {
    format!(
        r#"{{
  "model": {{ "sigma": 1.0, "base_mean": 0.0, "base_sd": 2.6 }},
  "alpha": 0.01,
  "r": 2,
  "sampler": {{ "iterations": {iterations}, "burn_in": {burn_in}, "seed": {seed} }},
  "synthetic": {{
    "crms": [
      {{ "components": [ {{ "mean": -5.0, "sd": 1.0 }} ] }},
      {{ "components": [ {{ "mean": 5.0, "sd": 1.0 }} ] }}
    ],
    "group_weights": [ [0.8, 0.2], [0.2, 0.8] ],
    "group_sizes": [{}, {}],
    "seed": 99
  }}
}}"#,
        sizes.0, sizes.1
    )
}

#[test]
fn simulate_writes_expected_row_counts_and_is_deterministic() {
    let dir = tmp_dir("simulate");
    let config = dir.join("config.json");
    write(&config, &small_config((1, 1), 5, 1, 0));

    let out = run(&["simulate", "--config", config.to_str().unwrap(), "--out", dir.join("a").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("a/data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3); // header + 2 rows

    let out = run(&["simulate", "--config", config.to_str().unwrap(), "--out", dir.join("b").to_str().unwrap()]);
    assert!(out.status.success());
    let csv_b = std::fs::read_to_string(dir.join("b/data.csv")).unwrap();
    assert_eq!(csv, csv_b);
    assert!(dir.join("a/labels.json").exists());
}

#[test]
fn bundled_benchmark_config_simulates_six_hundred_rows() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/benchmark.json");
    let dir = tmp_dir("bench_sim");
    let out = run(&["simulate", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 601); // header + 300 + 300
}

#[test]
fn fit_single_iteration_produces_all_outputs() {
    let dir = tmp_dir("fit_one");
    let config = dir.join("config.json");
    write(&config, &small_config((4, 3), 1, 0, 3));
    assert!(run(&["simulate", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]).status.success());
    let out = run(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--data",
        dir.join("data.csv").to_str().unwrap(),
        "--out",
        dir.join("fit").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["trace.csv", "summary.csv", "clusters.csv", "manifest.json"] {
        assert!(dir.join("fit").join(file).exists(), "{file} missing");
    }
    let trace = std::fs::read_to_string(dir.join("fit/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2); // header + the single sample
    assert!(trace.starts_with("iter,K,u_1,u_2,w_1_1,w_1_2,w_2_1,w_2_2"));
}

#[test]
fn fit_cluster_percentages_sum_to_one_hundred() {
    let dir = tmp_dir("fit_pct");
    let config = dir.join("config.json");
    write(&config, &small_config((12, 9), 40, 10, 5));
    assert!(run(&["simulate", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]).status.success());
    assert!(run(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--data",
        dir.join("data.csv").to_str().unwrap(),
        "--out",
        dir.join("fit").to_str().unwrap(),
    ])
    .status
    .success());
    let clusters = std::fs::read_to_string(dir.join("fit/clusters.csv")).unwrap();
    let mut totals = [0.0f64; 2];
    for line in clusters.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        totals[0] += fields[3].parse::<f64>().unwrap();
        totals[1] += fields[5].parse::<f64>().unwrap();
    }
    for t in totals {
        assert!((t - 100.0).abs() < 0.1, "percent total {t}");
    }
}

#[test]
fn report_of_single_sample_trace_echoes_that_sample() {
    let dir = tmp_dir("report_single");
    let trace = dir.join("trace.csv");
    write(&trace, "iter,K,u_1,w_1_1\n0,4,1.5,2.0\n");
    let out = run(&["report", "--trace", trace.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("mean K: 4.0000"), "{text}");
    assert!(text.contains("[2.0000]"), "{text}");
    assert!(text.contains("[1.0000]"), "{text}");
}

#[test]
fn report_rejects_empty_trace_with_usage_exit_code() {
    let dir = tmp_dir("report_empty");
    let trace = dir.join("trace.csv");
    write(&trace, "iter,K,u_1,w_1_1\n");
    let out = run(&["report", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no samples"));
}

#[test]
fn missing_data_file_yields_io_exit_code() {
    let dir = tmp_dir("missing_data");
    let config = dir.join("config.json");
    write(&config, &small_config((2, 2), 2, 0, 1));
    let out = run(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--data",
        dir.join("nope.csv").to_str().unwrap(),
        "--out",
        dir.join("fit").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_config_yields_usage_exit_code() {
    let dir = tmp_dir("bad_config");
    let config = dir.join("config.json");
    write(&config, "{ \"model\": { \"sigma\": -1.0, \"base_mean\": 0, \"base_sd\": 1 }, \"alpha\": 1, \"r\": 1, \"sampler\": { \"iterations\": 5 } }");
    let out = run(&["fit", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = run(&["validate", "--suite", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_gradients_suite_passes_and_writes_report() {
    let dir = tmp_dir("validate_grad");
    let out = run(&["validate", "--suite", "gradients", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report = std::fs::read_to_string(dir.join("validate_gradients.csv")).unwrap();
    assert!(report.contains("grad_u_vs_central_differences,pass"));
    assert!(report.contains("grad_w_vs_central_differences,pass"));
}

#[test]
fn multi_chain_fit_writes_per_chain_and_pooled_outputs() {
    let dir = tmp_dir("chains");
    let config = dir.join("config.json");
    write(&config, &small_config((6, 6), 20, 5, 9));
    assert!(run(&["simulate", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()]).status.success());
    let out = run(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--data",
        dir.join("data.csv").to_str().unwrap(),
        "--out",
        dir.join("fit").to_str().unwrap(),
        "--chains",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for c in 0..3 {
        assert!(dir.join(format!("fit/trace_chain{c}.csv")).exists());
        assert!(dir.join(format!("fit/summary_chain{c}.csv")).exists());
    }
    let pooled = std::fs::read_to_string(dir.join("fit/summary.csv")).unwrap();
    assert!(pooled.contains("chains,3"));
}
