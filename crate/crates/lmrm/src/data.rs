//! Datasets and run configuration: synthetic grouped-mixture generation,
//! CSV ingestion (`group,value` with a header row), and the JSON run
//! configuration consumed by the CLI.

use crate::gaussian::GaussianModel;
use crate::gibbs::SamplerConfig;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: empty file, expected a header row")]
    Empty { path: PathBuf },
    #[error("{path}: header must contain columns {expected:?}, found {found:?}")]
    MissingColumns { path: PathBuf, expected: Vec<String>, found: Vec<String> },
    #[error("{path}:{row}: expected {expected} fields, found {found}")]
    FieldCount { path: PathBuf, row: usize, expected: usize, found: usize },
    #[error("{path}:{row}: column '{column}': cannot parse '{value}' as a number")]
    BadNumber { path: PathBuf, row: usize, column: String, value: String },
    #[error("{path}: group '{group}' has no observations")]
    EmptyGroup { path: PathBuf, group: String },
    #[error("{path}: no data rows")]
    NoRows { path: PathBuf },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

/// `d` groups of real-valued observations. Group keys are kept so a
/// loaded file round-trips byte for byte.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    groups: Vec<Vec<f64>>,
    keys: Vec<String>,
}

impl GroupedDataset {
    /// Groups keyed `1..=d`.
    pub fn from_groups(groups: Vec<Vec<f64>>) -> Self {
        assert!(!groups.is_empty(), "need at least one group");
        let keys = (1..=groups.len()).map(|i| i.to_string()).collect();
        Self { groups, keys }
    }

    pub fn from_keyed_groups(groups: Vec<Vec<f64>>, keys: Vec<String>) -> Self {
        assert_eq!(groups.len(), keys.len());
        assert!(!groups.is_empty(), "need at least one group");
        Self { groups, keys }
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.len()).collect()
    }

    pub fn n_observations(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }

    pub fn value(&self, group: usize, index: usize) -> f64 {
        self.groups[group][index]
    }

    /// Serializes as `group,value` rows in group order. Values use Rust's
    /// shortest round-trip float formatting, so load ∘ store is exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,value\n");
        for (key, group) in self.keys.iter().zip(&self.groups) {
            for x in group {
                let _ = writeln!(out, "{key},{x}");
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_csv())
            .map_err(|source| DataError::Io { path: path.to_path_buf(), source })
    }
}

fn find_column(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

fn parse_rows(path: &Path, text: &str) -> Result<(Vec<String>, Vec<(usize, Vec<String>)>), DataError> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>(),
        None => return Err(DataError::Empty { path: path.to_path_buf() }),
    };
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        // rows are reported 1-based, counting the header
        rows.push((idx + 1, line.split(',').map(|s| s.trim().to_string()).collect()));
    }
    Ok((header, rows))
}

/// Reads a `group,value` CSV. Group keys (integers or strings) are mapped
/// to indices in order of first appearance.
pub fn load_csv(path: &Path) -> Result<GroupedDataset, DataError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    let (header, rows) = parse_rows(path, &text)?;
    let (group_col, value_col) = match (find_column(&header, "group"), find_column(&header, "value")) {
        (Some(g), Some(v)) => (g, v),
        _ => {
            return Err(DataError::MissingColumns {
                path: path.to_path_buf(),
                expected: vec!["group".into(), "value".into()],
                found: header,
            })
        }
    };
    let needed = group_col.max(value_col) + 1;
    let mut keys: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for (row, fields) in rows {
        if fields.len() < needed {
            return Err(DataError::FieldCount {
                path: path.to_path_buf(),
                row,
                expected: needed,
                found: fields.len(),
            });
        }
        let key = &fields[group_col];
        let value: f64 = fields[value_col].parse().map_err(|_| DataError::BadNumber {
            path: path.to_path_buf(),
            row,
            column: "value".into(),
            value: fields[value_col].clone(),
        })?;
        let gi = match keys.iter().position(|k| k == key) {
            Some(gi) => gi,
            None => {
                keys.push(key.clone());
                groups.push(Vec::new());
                keys.len() - 1
            }
        };
        groups[gi].push(value);
    }
    if groups.is_empty() {
        return Err(DataError::NoRows { path: path.to_path_buf() });
    }
    for (key, group) in keys.iter().zip(&groups) {
        if group.is_empty() {
            return Err(DataError::EmptyGroup { path: path.to_path_buf(), group: key.clone() });
        }
    }
    Ok(GroupedDataset::from_keyed_groups(groups, keys))
}

/// Converts the published blood-pressure schema
/// (`Subject,Treatment,...,After_exp_BP`) into two groups: patients on the
/// real drug (`Treatment = 1`) first, placebo second, using the
/// post-experiment pressure as the observation.
pub fn load_clinical_csv(path: &Path) -> Result<GroupedDataset, DataError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    let (header, rows) = parse_rows(path, &text)?;
    let (treat_col, bp_col) =
        match (find_column(&header, "Treatment"), find_column(&header, "After_exp_BP")) {
            (Some(t), Some(b)) => (t, b),
            _ => {
                return Err(DataError::MissingColumns {
                    path: path.to_path_buf(),
                    expected: vec!["Treatment".into(), "After_exp_BP".into()],
                    found: header,
                })
            }
        };
    let needed = treat_col.max(bp_col) + 1;
    let mut treated = Vec::new();
    let mut placebo = Vec::new();
    for (row, fields) in rows {
        if fields.len() < needed {
            return Err(DataError::FieldCount {
                path: path.to_path_buf(),
                row,
                expected: needed,
                found: fields.len(),
            });
        }
        let flag: i64 = fields[treat_col].parse().map_err(|_| DataError::BadNumber {
            path: path.to_path_buf(),
            row,
            column: "Treatment".into(),
            value: fields[treat_col].clone(),
        })?;
        let bp: f64 = fields[bp_col].parse().map_err(|_| DataError::BadNumber {
            path: path.to_path_buf(),
            row,
            column: "After_exp_BP".into(),
            value: fields[bp_col].clone(),
        })?;
        if flag == 1 {
            treated.push(bp);
        } else {
            placebo.push(bp);
        }
    }
    if treated.is_empty() || placebo.is_empty() {
        return Err(DataError::NoRows { path: path.to_path_buf() });
    }
    Ok(GroupedDataset::from_keyed_groups(vec![treated, placebo], vec!["1".into(), "2".into()]))
}

/// One Gaussian component inside an underlying random measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: f64,
    pub sd: f64,
    /// Within-measure selection probability; defaults to equal weights.
    #[serde(default)]
    pub weight: Option<f64>,
}

/// A finite Gaussian mixture standing in for one underlying CRM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrmMixture {
    pub components: Vec<MixtureComponent>,
}

impl CrmMixture {
    fn weights(&self) -> Vec<f64> {
        let explicit: Vec<f64> =
            self.components.iter().map(|c| c.weight.unwrap_or(f64::NAN)).collect();
        if explicit.iter().all(|w| w.is_nan()) {
            vec![1.0 / self.components.len() as f64; self.components.len()]
        } else {
            explicit
        }
    }
}

/// Ground truth for one generated observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueLabel {
    pub crm: usize,
    pub component: usize,
}

/// Generator settings: which measure each group draws from how often, and
/// what each measure looks like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub crms: Vec<CrmMixture>,
    /// Row `i` gives group i's selection probabilities over the CRMs;
    /// each row must sum to 1.
    pub group_weights: Vec<Vec<f64>>,
    pub group_sizes: Vec<usize>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.crms.is_empty() {
            return Err(DataError::BadConfig("need at least one CRM mixture".into()));
        }
        for (r, crm) in self.crms.iter().enumerate() {
            if crm.components.is_empty() {
                return Err(DataError::BadConfig(format!("CRM {r} has no components")));
            }
            let ws = crm.weights();
            if ws.iter().any(|&w| w.is_nan() || w < 0.0) {
                return Err(DataError::BadConfig(format!(
                    "CRM {r}: component weights must all be set and non-negative"
                )));
            }
            if (ws.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(DataError::BadConfig(format!("CRM {r}: component weights must sum to 1")));
            }
            if crm.components.iter().any(|c| c.sd <= 0.0) {
                return Err(DataError::BadConfig(format!("CRM {r}: component sd must be positive")));
            }
        }
        if self.group_weights.len() != self.group_sizes.len() || self.group_weights.is_empty() {
            return Err(DataError::BadConfig("group_weights and group_sizes must align".into()));
        }
        for (i, row) in self.group_weights.iter().enumerate() {
            if row.len() != self.crms.len() {
                return Err(DataError::BadConfig(format!(
                    "group {i}: expected {} CRM weights",
                    self.crms.len()
                )));
            }
            if row.iter().any(|&w| w < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(DataError::BadConfig(format!(
                    "group {i}: CRM weights must be non-negative and sum to 1"
                )));
            }
        }
        Ok(())
    }
}

fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (idx, &w) in weights.iter().enumerate() {
        target -= w;
        if target <= 0.0 {
            return idx;
        }
    }
    weights.len() - 1
}

/// Draws the dataset: per observation pick a CRM from the group's row,
/// then a component within that CRM, then the Gaussian value. Returns the
/// data plus per-observation ground-truth labels.
pub fn generate<R: Rng>(
    spec: &SyntheticSpec,
    rng: &mut R,
) -> Result<(GroupedDataset, Vec<Vec<TrueLabel>>), DataError> {
    spec.validate()?;
    let mut groups = Vec::with_capacity(spec.group_sizes.len());
    let mut labels = Vec::with_capacity(spec.group_sizes.len());
    for (i, &n) in spec.group_sizes.iter().enumerate() {
        let mut values = Vec::with_capacity(n);
        let mut group_labels = Vec::with_capacity(n);
        for _ in 0..n {
            let r = sample_index(&spec.group_weights[i], rng);
            let crm = &spec.crms[r];
            let c = sample_index(&crm.weights(), rng);
            let comp = crm.components[c];
            let value = Normal::new(comp.mean, comp.sd).expect("valid sd").sample(rng);
            values.push(value);
            group_labels.push(TrueLabel { crm: r, component: c });
        }
        groups.push(values);
        labels.push(group_labels);
    }
    Ok((GroupedDataset::from_groups(groups), labels))
}

/// [`generate`] with the spec's own seed.
pub fn generate_seeded(spec: &SyntheticSpec) -> Result<(GroupedDataset, Vec<Vec<TrueLabel>>), DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    generate(spec, &mut rng)
}

/// Full run configuration: model constants, the Lévy concentration, the
/// number of underlying measures to fit, and the sampler settings. For
/// `simulate` the `synthetic` block must be present; for `fit` the data
/// path comes from the config or the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: GaussianModel,
    pub alpha: f64,
    pub r: usize,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.alpha <= 0.0 || !self.alpha.is_finite() {
            return Err(DataError::BadConfig("alpha must be positive".into()));
        }
        if self.r == 0 {
            return Err(DataError::BadConfig("r must be at least 1".into()));
        }
        if self.model.sigma <= 0.0 || self.model.base_sd <= 0.0 {
            return Err(DataError::BadConfig("model scales must be positive".into()));
        }
        self.sampler
            .validate()
            .map_err(|e| DataError::BadConfig(e.to_string()))?;
        if let Some(spec) = &self.synthetic {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| DataError::BadConfig(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }
}
