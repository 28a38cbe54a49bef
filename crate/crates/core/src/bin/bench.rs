//! Benchmark CLI.
//!
//! `bench run --config <file>` executes a dataset × method matrix and writes
//! a CSV or JSON report; `bench list --data-dir <dir>` enumerates loadable
//! datasets. Exit codes: 0 on full success, 1 on partial method failures,
//! 2 on configuration or ingestion errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use srn::bench::{self, BenchmarkConfig, DATA_DIR_ENV};

#[derive(Parser)]
#[command(name = "bench", about = "Imbalanced-classification sampling benchmark", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the benchmark matrix described by a config file and/or flags.
    Run(RunArgs),
    /// List loadable datasets in a directory, sorted by imbalance ratio.
    List(ListArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value config file (keys mirror the flag names).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated dataset ids, or "all".
    #[arg(long)]
    datasets: Option<String>,
    /// Comma-separated methods: none, rus, smote, nc, enn, tomek,
    /// smote-enn, smote-tomek, smote-rus-nc, rf, brf, srn-brf.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    /// "default" for the 0.3-0.6 grid, or comma-separated values.
    #[arg(long = "alpha-grid")]
    alpha_grid: Option<String>,
    #[arg(long)]
    trees: Option<usize>,
    /// Output file path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    /// Dataset directory (defaults to config, then $SRN_DATA_DIR, then ./data).
    #[arg(long = "data-dir")]
    data_dir: Option<PathBuf>,
    /// on | off: per-cell wall-clock timing in the report.
    #[arg(long)]
    timing: Option<String>,
}

#[derive(Args)]
struct ListArgs {
    #[arg(long = "data-dir", env = DATA_DIR_ENV, default_value = "data")]
    data_dir: PathBuf,
}

fn build_config(args: &RunArgs) -> srn::Result<BenchmarkConfig> {
    let mut config = match &args.config {
        Some(path) => BenchmarkConfig::from_file(path)?,
        None => BenchmarkConfig::default(),
    };
    let overrides: [(&str, Option<String>); 8] = [
        ("datasets", args.datasets.clone()),
        ("methods", args.methods.clone()),
        ("seed", args.seed.map(|s| s.to_string())),
        ("n_folds", args.folds.map(|f| f.to_string())),
        ("alpha_grid", args.alpha_grid.clone()),
        ("n_trees", args.trees.map(|t| t.to_string())),
        ("format", args.format.clone()),
        ("timing", args.timing.clone()),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            config.set(key, &v)?;
        }
    }
    if let Some(dir) = &args.data_dir {
        config.data_dir = dir.clone();
    }
    if let Some(out) = &args.out {
        config.output = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();

    match cli.command {
        Command::Run(args) => {
            let config = match build_config(&args) {
                Ok(c) => c,
                Err(e) => {
                    log::error!("{e}");
                    return ExitCode::from(2);
                }
            };
            let report = match bench::run(&config) {
                Ok(r) => r,
                Err(e) => {
                    log::error!("{e}");
                    return ExitCode::from(2);
                }
            };
            if let Err(e) = report.emit(&config.output, config.format) {
                log::error!("{e}");
                return ExitCode::from(2);
            }
            log::info!(
                "wrote {} ({} cells, {} failures)",
                config.output.display(),
                report.cells.len(),
                report.failures.len()
            );
            if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::List(args) => match bench::list_datasets(&args.data_dir) {
            Ok((entries, errors)) => {
                println!("{:<32} {:>8} {:>4} {:>8}", "dataset", "rows", "d", "IR");
                for e in &entries {
                    println!("{:<32} {:>8} {:>4} {:>8.2}", e.id, e.n_rows, e.n_features, e.rho);
                }
                for err in &errors {
                    log::warn!("{}: {}", err.file, err.error);
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                log::error!("{e}");
                ExitCode::from(2)
            }
        },
    }
}
