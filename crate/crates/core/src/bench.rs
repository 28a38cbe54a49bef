//! Benchmark harness: declarative run configuration, dataset discovery,
//! method-matrix execution, and CSV/JSON report emission.
//!
//! For each dataset, one `FoldPlan` is built from `(seed, dataset)` and
//! shared by every method, so all methods see identical train/test splits.
//! Sampler methods pair with a fixed plain-forest learner; the ensemble
//! methods (rf, brf, srn-brf) train on raw training folds and balance
//! internally.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, LabeledDataset};
use crate::error::{Error, Result};
use crate::evaluation::{
    self, CvReport, FoldPlan, LearnerSpec, SamplerId,
};
use crate::forest::ForestKind;
use crate::rng;
use crate::samplers::SamplerConfig;

/// Environment variable supplying the default data directory.
pub const DATA_DIR_ENV: &str = "SRN_DATA_DIR";

pub const DEFAULT_ALPHA_GRID: [f64; 4] = [0.3, 0.4, 0.5, 0.6];

const METRIC_NAMES: [&str; 5] = ["accuracy", "sensitivity", "specificity", "gmean", "roc_auc"];

/// Everything the matrix can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Sampler(SamplerId),
    Ensemble(ForestKind),
}

impl Method {
    pub const ALL: [Method; 12] = [
        Method::Sampler(SamplerId::None),
        Method::Sampler(SamplerId::Rus),
        Method::Sampler(SamplerId::Smote),
        Method::Sampler(SamplerId::Nc),
        Method::Sampler(SamplerId::Enn),
        Method::Sampler(SamplerId::Tomek),
        Method::Sampler(SamplerId::SmoteEnn),
        Method::Sampler(SamplerId::SmoteTomek),
        Method::Sampler(SamplerId::SmoteRusNc),
        Method::Ensemble(ForestKind::PlainRf),
        Method::Ensemble(ForestKind::Brf),
        Method::Ensemble(ForestKind::SrnBrf),
    ];

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Sampler(s) => f.write_str(s.as_str()),
            Method::Ensemble(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSelection {
    All,
    Ids(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaGrid {
    /// `[0.3, 0.4, 0.5, 0.6]`; infeasible values clamp inside the pipeline.
    Default,
    Explicit(Vec<f64>),
}

impl AlphaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            AlphaGrid::Default => DEFAULT_ALPHA_GRID.to_vec(),
            AlphaGrid::Explicit(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub data_dir: PathBuf,
    pub datasets: DatasetSelection,
    pub methods: Vec<Method>,
    pub n_folds: usize,
    pub seed: u64,
    pub alpha_grid: AlphaGrid,
    pub n_trees: usize,
    pub output: PathBuf,
    pub format: OutputFormat,
    /// Wall-clock timing per cell; disable for byte-identical reruns.
    pub timing: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            data_dir: std::env::var(DATA_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|_| PathBuf::from("data")),
            datasets: DatasetSelection::All,
            methods: Vec::new(),
            n_folds: 10,
            seed: 0,
            alpha_grid: AlphaGrid::Default,
            n_trees: 100,
            output: PathBuf::from("report.csv"),
            format: OutputFormat::Csv,
            timing: true,
        }
    }
}

impl BenchmarkConfig {
    /// Parse the flat `key = value` config format. Unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<BenchmarkConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut config = BenchmarkConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: "expected `key = value`".into(),
            })?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: e.to_string(),
                })?;
        }
        Ok(config)
    }

    /// Apply one `key = value` assignment (config file and CLI overrides
    /// share this).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data_dir" => self.data_dir = PathBuf::from(value),
            "datasets" => {
                self.datasets = if value == "all" {
                    DatasetSelection::All
                } else {
                    DatasetSelection::Ids(
                        value
                            .split(',')
                            .map(|s| s.trim().to_string())
                            .filter(|s| !s.is_empty())
                            .collect(),
                    )
                }
            }
            "methods" => {
                self.methods = value
                    .split(',')
                    .map(|s| Method::parse(s.trim()))
                    .collect::<Result<_>>()?
            }
            "n_folds" | "folds" => {
                self.n_folds = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad n_folds {value:?}")))?
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad seed {value:?}")))?
            }
            "alpha_grid" => {
                self.alpha_grid = if value == "default" {
                    AlphaGrid::Default
                } else {
                    AlphaGrid::Explicit(
                        value
                            .split(',')
                            .map(|s| {
                                s.trim().parse::<f64>().map_err(|_| {
                                    Error::Config(format!("bad alpha value {s:?}"))
                                })
                            })
                            .collect::<Result<_>>()?,
                    )
                }
            }
            "n_trees" | "trees" => {
                self.n_trees = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad n_trees {value:?}")))?
            }
            "output" => self.output = PathBuf::from(value),
            "format" => {
                self.format = match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => return Err(Error::Config(format!("unknown format {other:?}"))),
                }
            }
            "timing" => {
                self.timing = match value {
                    "on" | "true" => true,
                    "off" | "false" => false,
                    other => return Err(Error::Config(format!("bad timing value {other:?}"))),
                }
            }
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("methods must be non-empty".into()));
        }
        if self.n_folds < 2 {
            return Err(Error::Config("n_folds must be >= 2".into()));
        }
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be >= 1".into()));
        }
        if let AlphaGrid::Explicit(values) = &self.alpha_grid {
            if values.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
                return Err(Error::Config("alpha grid values must be in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// Result of one (dataset, method) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub imbalance_ratio: f64,
    pub method: String,
    pub means: [Option<f64>; 5],
    pub per_fold: Vec<[Option<f64>; 5]>,
    pub chosen_alpha: Option<f64>,
    pub grid_selected: bool,
    pub runtime_s: Option<f64>,
    pub seed: u64,
    pub plan_hash: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFailure {
    pub dataset: String,
    pub method: String,
    pub error: String,
}

/// One row per (dataset, method, metric); the view the report invariants
/// are stated over.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRow {
    pub dataset: String,
    pub imbalance_ratio: f64,
    pub method: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub per_fold: Vec<Option<f64>>,
    pub chosen_alpha: Option<f64>,
    pub runtime_s: Option<f64>,
    pub seed: u64,
    pub plan_hash: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
    pub seed: u64,
}

impl BenchmarkReport {
    pub fn metric_rows(&self) -> Vec<MetricRow> {
        let mut rows = Vec::with_capacity(self.cells.len() * METRIC_NAMES.len());
        for cell in &self.cells {
            for (m, name) in METRIC_NAMES.iter().enumerate() {
                rows.push(MetricRow {
                    dataset: cell.dataset.clone(),
                    imbalance_ratio: cell.imbalance_ratio,
                    method: cell.method.clone(),
                    metric: (*name).to_string(),
                    mean: cell.means[m],
                    per_fold: cell.per_fold.iter().map(|f| f[m]).collect(),
                    chosen_alpha: cell.chosen_alpha,
                    runtime_s: cell.runtime_s,
                    seed: cell.seed,
                    plan_hash: cell.plan_hash.clone(),
                });
            }
        }
        rows
    }

    /// Render as CSV: one line per (dataset, method), metrics as percentage
    /// columns with two decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "dataset,imbalance_ratio,method,accuracy,sensitivity,specificity,gmean,roc_auc,chosen_alpha,runtime_s,seed\n",
        );
        for cell in &self.cells {
            let _ = write!(out, "{},{:.2},{}", cell.dataset, cell.imbalance_ratio, cell.method);
            for m in cell.means {
                match m {
                    Some(v) => {
                        let _ = write!(out, ",{:.2}", v * 100.0);
                    }
                    None => out.push(','),
                }
            }
            match cell.chosen_alpha {
                Some(a) => {
                    let _ = write!(out, ",{a}");
                }
                None => out.push(','),
            }
            match cell.runtime_s {
                Some(t) => {
                    let _ = write!(out, ",{t:.3}");
                }
                None => out.push(','),
            }
            let _ = writeln!(out, ",{}", cell.seed);
        }
        out
    }

    /// Render as JSON with full-precision means and per-fold arrays.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct JsonCell<'a> {
            dataset: &'a str,
            imbalance_ratio: f64,
            method: &'a str,
            accuracy: Option<f64>,
            sensitivity: Option<f64>,
            specificity: Option<f64>,
            gmean: Option<f64>,
            roc_auc: Option<f64>,
            chosen_alpha: Option<f64>,
            grid_selected: bool,
            runtime_s: Option<f64>,
            seed: u64,
            plan_hash: &'a str,
            per_fold: std::collections::BTreeMap<&'static str, Vec<Option<f64>>>,
        }
        #[derive(Serialize)]
        struct JsonReport<'a> {
            seed: u64,
            cells: Vec<JsonCell<'a>>,
            failures: &'a [CellFailure],
        }
        let cells = self
            .cells
            .iter()
            .map(|c| JsonCell {
                dataset: &c.dataset,
                imbalance_ratio: c.imbalance_ratio,
                method: &c.method,
                accuracy: c.means[0],
                sensitivity: c.means[1],
                specificity: c.means[2],
                gmean: c.means[3],
                roc_auc: c.means[4],
                chosen_alpha: c.chosen_alpha,
                grid_selected: c.grid_selected,
                runtime_s: c.runtime_s,
                seed: c.seed,
                plan_hash: &c.plan_hash,
                per_fold: METRIC_NAMES
                    .iter()
                    .enumerate()
                    .map(|(m, name)| (*name, c.per_fold.iter().map(|f| f[m]).collect()))
                    .collect(),
            })
            .collect();
        let report = JsonReport {
            seed: self.seed,
            cells,
            failures: &self.failures,
        };
        serde_json::to_string_pretty(&report).expect("report serialization cannot fail")
    }

    /// Write the report to `path` in the requested format.
    pub fn emit(&self, path: &Path, format: OutputFormat) -> Result<()> {
        let body = match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        };
        fs::write(path, body).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub rho: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ListingError {
    pub file: String,
    pub error: String,
}

/// Enumerate the loadable datasets under `data_dir`, sorted by imbalance
/// ratio ascending. Corrupt files are reported alongside, not fatal.
pub fn list_datasets(data_dir: &Path) -> Result<(Vec<DatasetEntry>, Vec<ListingError>)> {
    let mut files: Vec<PathBuf> = fs::read_dir(data_dir)
        .map_err(|e| Error::Io {
            path: data_dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("dat") | Some("csv")
            )
        })
        .collect();
    files.sort();

    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for path in files {
        match load_any(&path) {
            Ok(ds) => match ds.class_stats() {
                Ok(stats) => entries.push(DatasetEntry {
                    id: dataset_id(&path),
                    n_rows: ds.n_rows(),
                    n_features: ds.n_features(),
                    rho: stats.rho,
                }),
                Err(e) => errors.push(ListingError {
                    file: path.display().to_string(),
                    error: e.to_string(),
                }),
            },
            Err(e) => errors.push(ListingError {
                file: path.display().to_string(),
                error: e.to_string(),
            }),
        }
    }
    entries.sort_by(|a, b| a.rho.partial_cmp(&b.rho).unwrap().then(a.id.cmp(&b.id)));
    Ok((entries, errors))
}

fn dataset_id(path: &Path) -> String {
    path.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

/// Load a `.dat` (KEEL) or `.csv` (last column is the class) dataset file.
pub fn load_any(path: &Path) -> Result<LabeledDataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("dat") => dataset::load_keel(path),
        Some("csv") => {
            let headers = {
                let mut rdr = csv::ReaderBuilder::new()
                    .has_headers(true)
                    .from_path(path)
                    .map_err(|e| Error::Schema {
                        path: path.to_path_buf(),
                        message: e.to_string(),
                    })?;
                rdr.headers()
                    .map_err(|e| Error::Schema {
                        path: path.to_path_buf(),
                        message: e.to_string(),
                    })?
                    .len()
            };
            dataset::load_csv(path, &dataset::LabelColumn::Index(headers - 1), None)
        }
        _ => Err(Error::Config(format!(
            "unsupported dataset file {}",
            path.display()
        ))),
    }
}

fn resolve_dataset_file(data_dir: &Path, id: &str) -> Result<PathBuf> {
    for ext in ["dat", "csv"] {
        let candidate = data_dir.join(format!("{id}.{ext}"));
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(Error::Config(format!(
        "dataset {id:?} not found under {}",
        data_dir.display()
    )))
}

/// Execute the configured dataset × method matrix.
pub fn run(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    config.validate()?;

    // Resolve and load every requested dataset before any work starts.
    let ids: Vec<String> = match &config.datasets {
        DatasetSelection::All => {
            let (entries, errors) = list_datasets(&config.data_dir)?;
            for e in &errors {
                log::warn!("skipping {}: {}", e.file, e.error);
            }
            entries.into_iter().map(|e| e.id).collect()
        }
        DatasetSelection::Ids(ids) => ids.clone(),
    };
    if ids.is_empty() {
        return Err(Error::Config(format!(
            "no datasets to run under {}",
            config.data_dir.display()
        )));
    }
    let datasets: Vec<(String, LabeledDataset)> = ids
        .iter()
        .map(|id| {
            let path = resolve_dataset_file(&config.data_dir, id)?;
            Ok((id.clone(), load_any(&path)?))
        })
        .collect::<Result<_>>()?;

    // One fold plan per dataset, shared by every method.
    let plans: Vec<FoldPlan> = datasets
        .iter()
        .map(|(id, ds)| {
            evaluation::stratified_kfold(
                ds.labels(),
                config.n_folds,
                rng::derive(config.seed, &format!("plan:{id}"), 0),
            )
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..config.methods.len()).map(move |m| (d, m)))
        .collect();

    let outcomes: Vec<std::result::Result<CellResult, CellFailure>> = cells
        .par_iter()
        .map(|&(d, m)| {
            let (id, ds) = &datasets[d];
            let method = config.methods[m];
            let start = Instant::now();
            match run_cell(config, id, ds, &plans[d], method) {
                Ok(report) => {
                    let rho = ds.class_stats().map(|s| s.rho).unwrap_or(f64::NAN);
                    let runtime = config.timing.then(|| start.elapsed().as_secs_f64());
                    log::info!(
                        "{id} x {method}: gmean = {}",
                        report
                            .mean
                            .gmean
                            .map_or("n/a".into(), |g| format!("{:.2}%", g * 100.0))
                    );
                    Ok(cell_from_report(id, rho, &method, report, runtime, config.seed))
                }
                Err(e) => {
                    log::warn!("{id} x {method} failed: {e}");
                    Err(CellFailure {
                        dataset: id.clone(),
                        method: method.to_string(),
                        error: e.to_string(),
                    })
                }
            }
        })
        .collect();

    let mut report = BenchmarkReport {
        cells: Vec::new(),
        failures: Vec::new(),
        seed: config.seed,
    };
    for outcome in outcomes {
        match outcome {
            Ok(cell) => report.cells.push(cell),
            Err(failure) => report.failures.push(failure),
        }
    }
    Ok(report)
}

fn run_cell(
    config: &BenchmarkConfig,
    id: &str,
    ds: &LabeledDataset,
    plan: &FoldPlan,
    method: Method,
) -> Result<CvReport> {
    let sampler_config = SamplerConfig {
        seed: rng::derive(config.seed, &format!("cell:{id}:{method}"), 0),
        ..SamplerConfig::default()
    };
    let learner = LearnerSpec {
        n_trees: config.n_trees,
    };
    match method {
        Method::Sampler(SamplerId::SmoteRusNc) => evaluation::evaluate_with_alpha_grid(
            ds,
            id,
            &sampler_config,
            &config.alpha_grid.values(),
            &learner,
            plan,
        ),
        Method::Sampler(s) => evaluation::evaluate_sampler(ds, id, s, &sampler_config, &learner, plan),
        Method::Ensemble(kind) => {
            evaluation::evaluate_ensemble(ds, id, kind, config.n_trees, &sampler_config, plan)
        }
    }
}

fn cell_from_report(
    id: &str,
    rho: f64,
    method: &Method,
    report: CvReport,
    runtime_s: Option<f64>,
    seed: u64,
) -> CellResult {
    let means = [
        report.mean.accuracy,
        report.mean.sensitivity,
        report.mean.specificity,
        report.mean.gmean,
        report.mean.roc_auc,
    ];
    let per_fold = report
        .per_fold
        .iter()
        .map(|f| [f.accuracy, f.sensitivity, f.specificity, f.gmean, f.roc_auc])
        .collect();
    CellResult {
        dataset: id.to_string(),
        imbalance_ratio: rho,
        method: method.to_string(),
        means,
        per_fold,
        chosen_alpha: report.chosen_alpha,
        grid_selected: report.grid_selected,
        runtime_s,
        seed,
        plan_hash: report.plan_hash,
    }
}
