//! Batch front end: generate synthetic grouped data, fit the mixture,
//! run the validation suites, and summarize chain traces.

mod output;

use clap::{Parser, Subcommand, ValueEnum};
use lmrm::data::{self, DataError, RunConfig};
use lmrm::gibbs;
use lmrm::levy::LmrmParams;
use lmrm::math::effective_sample_size;
use lmrm::validate::run_suite;
use output::{clusters_csv, sha256_hex, summary_csv, trace_csv, Manifest};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lmrm",
    version,
    about = "Clusters grouped observations with an infinite Gaussian mixture under a mixed Gamma random-measure prior"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic grouped dataset from the config's generator block.
    Simulate {
        /// JSON run configuration with a `synthetic` section.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for data.csv and labels.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the mixture to a grouped CSV and write trace/summary/cluster tables.
    Fit {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Grouped data CSV (header `group,value`); overrides the config's data path.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Independent chains, seeded seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        chains: usize,
    },
    /// Run a validation suite; exits nonzero if any check fails.
    Validate {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional directory for a CSV report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a trace CSV produced by fit.
    Report {
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Suite {
    Levy,
    Eppf,
    Gradients,
    Oracle,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Levy => "levy",
            Suite::Eppf => "eppf",
            Suite::Gradients => "gradients",
            Suite::Oracle => "oracle",
        }
    }
}

/// Exit codes: 1 usage/config, 2 validation failure, 3 i/o.
enum CliError {
    Usage(String),
    Validation(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Io(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<gibbs::ConfigError> for CliError {
    fn from(e: gibbs::ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))
}

fn simulate(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let config = RunConfig::from_json_file(config_path)?;
    let spec = config
        .synthetic
        .as_ref()
        .ok_or_else(|| CliError::Usage("config has no `synthetic` section".into()))?;
    let (dataset, labels) = data::generate_seeded(spec)?;
    ensure_dir(out)?;
    dataset.write_csv(&out.join("data.csv"))?;
    let labels_json = serde_json::to_string_pretty(&labels)
        .map_err(|e| CliError::Usage(format!("cannot serialize labels: {e}")))?;
    write_file(&out.join("labels.json"), &labels_json)?;
    println!(
        "wrote {} observations in {} groups to {}",
        dataset.n_observations(),
        dataset.n_groups(),
        out.display()
    );
    Ok(())
}

fn fit(config_path: &Path, data_path: Option<&Path>, out: &Path, chains: usize) -> Result<(), CliError> {
    if chains == 0 {
        return Err(CliError::Usage("need at least one chain".into()));
    }
    let config = RunConfig::from_json_file(config_path)?;
    let data_path: PathBuf = match (data_path, &config.data) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => p.clone(),
        (None, None) => {
            return Err(CliError::Usage("no data path given (flag --data or config `data`)".into()))
        }
    };
    let config_bytes = read_bytes(config_path)?;
    let data_bytes = read_bytes(&data_path)?;
    let dataset = data::load_csv(&data_path)?;
    let d = dataset.n_groups();
    let r = config.r;
    let model = config.model;

    let mut chain_results = Vec::with_capacity(chains);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|c| {
                let mut sampler = config.sampler.clone();
                sampler.seed = config.sampler.seed + c as u64;
                let dataset = &dataset;
                scope.spawn(move || {
                    let params0 = LmrmParams::ones(d, r, config.alpha);
                    gibbs::run(dataset, &model, params0, &sampler)
                })
            })
            .collect();
        for handle in handles {
            chain_results.push(handle.join().expect("chain thread panicked"));
        }
    });
    let chain_results: Vec<gibbs::RunResult> =
        chain_results.into_iter().collect::<Result<_, _>>()?;

    ensure_dir(out)?;
    let single = chains == 1;
    for (c, result) in chain_results.iter().enumerate() {
        let suffix = if single { String::new() } else { format!("_chain{c}") };
        write_file(&out.join(format!("trace{suffix}.csv")), &trace_csv(&result.samples, d, r))?;
        write_file(&out.join(format!("summary{suffix}.csv")), &summary_csv(result, d, r))?;
        write_file(
            &out.join(format!("clusters{suffix}.csv")),
            &clusters_csv(&result.cluster_table, d),
        )?;
    }
    if !single {
        write_file(&out.join("summary.csv"), &pooled_summary_csv(&chain_results, d, r))?;
    }

    let manifest = Manifest {
        command: "fit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(&config_bytes),
        data_sha256: sha256_hex(&data_bytes),
        data_path: data_path.display().to_string(),
        seed: config.sampler.seed,
        chains,
        r,
        alpha: config.alpha,
        sampler: config.sampler.clone(),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Usage(format!("cannot serialize manifest: {e}")))?;
    write_file(&out.join("manifest.json"), &manifest_json)?;

    let pooled_k: f64 = chain_results.iter().map(|r| r.summary.mean_k).sum::<f64>() / chains as f64;
    println!("fit complete: {chains} chain(s), mean K = {pooled_k:.4}");
    for (c, result) in chain_results.iter().enumerate() {
        println!(
            "  chain {c}: mean K = {:.4}, u acceptance {:.2}, w acceptance {:.2}, final clusters {}",
            result.summary.mean_k,
            result.summary.u_acceptance,
            result.summary.w_acceptance,
            result.cluster_table.len()
        );
    }
    Ok(())
}

fn pooled_summary_csv(results: &[gibbs::RunResult], d: usize, r: usize) -> String {
    use std::fmt::Write as _;
    let n = results.len() as f64;
    let mut out = String::from("key,value\n");
    let kept: usize = results.iter().map(|x| x.summary.kept_iterations).sum();
    let _ = writeln!(out, "chains,{}", results.len());
    let _ = writeln!(out, "kept_iterations,{kept}");
    let mean_k = results.iter().map(|x| x.summary.mean_k).sum::<f64>() / n;
    let _ = writeln!(out, "mean_k,{mean_k}");
    let ess: f64 = results
        .iter()
        .map(|x| {
            let ks: Vec<f64> = x.samples.iter().map(|s| s.k as f64).collect();
            effective_sample_size(&ks)
        })
        .sum();
    let _ = writeln!(out, "ess_k,{ess}");
    for i in 0..d {
        let m = results.iter().map(|x| x.summary.mean_u[i]).sum::<f64>() / n;
        let _ = writeln!(out, "mean_u_{},{m}", i + 1);
    }
    let mut mean_w = vec![0.0; d * r];
    for x in results {
        for (acc, &v) in mean_w.iter_mut().zip(&x.summary.mean_weights) {
            *acc += v / n;
        }
    }
    for i in 0..d {
        for j in 0..r {
            let _ = writeln!(out, "mean_w_{}_{},{}", i + 1, j + 1, mean_w[i * r + j]);
        }
    }
    for i in 0..d {
        let row = &mean_w[i * r..(i + 1) * r];
        let total: f64 = row.iter().sum();
        for j in 0..r {
            let _ = writeln!(out, "norm_w_{}_{},{}", i + 1, j + 1, row[j] / total);
        }
    }
    for i in 0..d {
        let m = results
            .iter()
            .map(|x| x.summary.mean_min_normalized_weights[i])
            .sum::<f64>()
            / n;
        let _ = writeln!(out, "min_norm_w_g{},{m}", i + 1);
    }
    out
}

fn validate(suite: Suite, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let report = run_suite(suite.name(), seed).expect("suite names are enumerated");
    print!("{}", report.render_text());
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_file(&dir.join(format!("validate_{}.csv", suite.name())), &report.to_csv())?;
    }
    if report.passed() {
        Ok(())
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        Err(CliError::Validation(format!(
            "{failed} of {} checks failed in suite {}",
            report.checks.len(),
            suite.name()
        )))
    }
}

fn report(trace_path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(trace_path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", trace_path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Usage("empty trace file".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 2 || columns[0] != "iter" || columns[1] != "K" {
        return Err(CliError::Usage("not a trace file (expected `iter,K,...` header)".into()));
    }
    let d = columns.iter().filter(|c| c.starts_with("u_")).count();
    let wcols = columns.iter().filter(|c| c.starts_with("w_")).count();
    if d == 0 || wcols == 0 || wcols % d != 0 {
        return Err(CliError::Usage("trace header has no u/w columns".into()));
    }
    let r = wcols / d;

    let mut ks: Vec<f64> = Vec::new();
    let mut w_acc = vec![0.0f64; d * r];
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(CliError::Usage(format!("trace row {} is malformed", idx + 2)));
        }
        let k: f64 = fields[1]
            .parse()
            .map_err(|_| CliError::Usage(format!("trace row {}: bad K", idx + 2)))?;
        ks.push(k);
        for (slot, f) in fields[2 + d..].iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| CliError::Usage(format!("trace row {}: bad weight", idx + 2)))?;
            w_acc[slot] += v;
        }
    }
    if ks.is_empty() {
        return Err(CliError::Usage("no samples in trace".into()));
    }
    let n = ks.len() as f64;
    let mean_k = ks.iter().sum::<f64>() / n;
    println!("samples: {}", ks.len());
    println!("mean K: {mean_k:.4}");
    println!("ESS of K: {:.1}", effective_sample_size(&ks));
    for i in 0..d {
        let row: Vec<f64> = (0..r).map(|j| w_acc[i * r + j] / n).collect();
        let total: f64 = row.iter().sum();
        let raw = row.iter().map(|w| format!("{w:.4}")).collect::<Vec<_>>().join(" ");
        let norm = row.iter().map(|w| format!("{:.4}", w / total)).collect::<Vec<_>>().join(" ");
        println!("group {}: mean weights [{raw}]  row-normalized [{norm}]", i + 1);
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Fit { config, data, out, chains } => {
            fit(&config, data.as_deref(), &out, chains)
        }
        Command::Validate { suite, seed, out } => validate(suite, seed, out.as_deref()),
        Command::Report { trace } => report(&trace),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit 2 on usage errors; this tool reserves 2 for
            // validation failures
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
