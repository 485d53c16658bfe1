//! `scope` — train, sweep and report on desk-scale semi-supervised runs.
//!
//! Subcommands: `gen-data`, `run`, `sweep`, `report`. Any config field can be
//! overridden on the command line with a dotted flag, e.g. `--scope.k=6`.
//!
//! Exit codes are a stable contract for scripting:
//!   0 success, 2 config error, 3 aborted run, 4 partial sweep failure,
//!   1 anything else.

mod config_io;
mod sweep;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use scope_core::config::GeneratorKind;
use scope_core::datasets::{self, DatasetMeta};
use scope_core::engine;
use scope_core::metrics;
use scope_core::Error;

use config_io::{load_config, preprocess_args};
use sweep::{run_sweep, summarize, write_run_artifacts, SweepPlan};

#[derive(Parser)]
#[command(name = "scope", version, about = "Semi-supervised pseudolabeling with outlier filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset CSV (plus metadata sidecar) from a config.
    GenData(CommonArgs),
    /// Execute one training run and write its report artifacts.
    Run(CommonArgs),
    /// Run the cross product of one config field and a seed range.
    Sweep(SweepArgs),
    /// Aggregate existing report.json files into a sweep summary.
    Report(ReportArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's out_dir.
    #[arg(long)]
    out_dir: Option<String>,
    /// Config override as dotted.path=value (also accepted directly as
    /// --dotted.path=value).
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Config field to sweep, e.g. scope.k or scope.filter_mode.
    #[arg(long)]
    key: String,
    /// Comma-separated list of values for the swept field.
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,
    /// Number of seeds per value; cell seeds are base seed + 0..n.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Concurrent child runs (default: SCOPE_JOBS or all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json files to aggregate.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Grouping field.
    #[arg(long, default_value = "seed")]
    group_by: String,
    /// Where to write sweep.csv.
    #[arg(long, default_value = "out")]
    out_dir: String,
}

fn main() {
    let args = preprocess_args(std::env::args().collect());
    let cli = Cli::parse_from(args);
    let code = match cli.command {
        Command::GenData(args) => report_exit(cmd_gen_data(&args)),
        Command::Run(args) => report_exit(cmd_run(&args)),
        Command::Sweep(args) => report_exit(cmd_sweep(&args)),
        Command::Report(args) => report_exit(cmd_report(&args)),
    };
    std::process::exit(code);
}

fn report_exit(result: Result<i32, Error>) -> i32 {
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) | Error::Split(_) => 2,
                Error::RunAborted { .. } => 3,
                _ => 1,
            }
        }
    }
}

fn cmd_gen_data(args: &CommonArgs) -> Result<i32, Error> {
    let config = load_config(&args.config, &args.set, args.out_dir.as_deref())?;
    let ds = &config.dataset;
    let dataset = match ds.generator {
        GeneratorKind::GaussianMixture => datasets::gen_gaussian_mixture(
            ds.n_per_class,
            ds.classes,
            ds.dims,
            ds.class_separation,
            ds.cov_scale,
            config.seed,
        )?,
        GeneratorKind::TwoMoons => datasets::gen_two_moons(ds.n, ds.noise_sd, config.seed)?,
        GeneratorKind::Csv => {
            return Err(Error::InvalidConfig(
                "dataset.generator: gen-data needs a synthetic generator, not csv".into(),
            ))
        }
    };
    let out_dir = Path::new(&config.out_dir);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let csv_path = out_dir.join("dataset.csv");
    let generator = match ds.generator {
        GeneratorKind::GaussianMixture => "gaussian_mixture",
        GeneratorKind::TwoMoons => "two_moons",
        GeneratorKind::Csv => "csv",
    };
    let meta = DatasetMeta {
        n: dataset.len(),
        d: dataset.dim,
        c: dataset.n_classes,
        seed: Some(config.seed),
        generator: Some(generator.to_string()),
        params: Some(serde_json::to_value(ds).map_err(Error::Json)?),
    };
    datasets::save_csv_with_meta(&dataset, &csv_path, &meta)?;
    println!("wrote {} ({} rows)", csv_path.display(), dataset.len());
    Ok(0)
}

fn cmd_run(args: &CommonArgs) -> Result<i32, Error> {
    let config = load_config(&args.config, &args.set, args.out_dir.as_deref())?;
    let outcome = engine::run(&config)?;
    let dir = PathBuf::from(&config.out_dir);
    write_run_artifacts(&outcome, &dir)?;
    let report = &outcome.report;
    println!(
        "final accuracy {:.4} (ci {:.4}..{:.4}), mean confounding {:.4}, report at {}",
        report.final_metrics.accuracy,
        report.final_metrics.ci[0],
        report.final_metrics.ci[1],
        report.mean_confounding_rate(),
        dir.join("report.json").display()
    );
    Ok(0)
}

fn default_jobs() -> usize {
    if let Ok(v) = std::env::var("SCOPE_JOBS") {
        if let Ok(n) = v.parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32, Error> {
    let config = load_config(
        &args.common.config,
        &args.common.set,
        args.common.out_dir.as_deref(),
    )?;
    let plan = SweepPlan {
        key: args.key.clone(),
        values: args.values.clone(),
        seeds: args.seeds,
        jobs: args.jobs.unwrap_or_else(default_jobs),
    };
    let out_dir = PathBuf::from(&config.out_dir);
    let results = run_sweep(&config, &plan, &out_dir)?;

    let mut failed = 0usize;
    for cell in &results {
        if let Err(e) = &cell.outcome {
            eprintln!(
                "cell {}={} seed {} ({}) failed: {e}",
                plan.key,
                cell.value,
                cell.seed,
                cell.dir.display()
            );
            failed += 1;
        }
    }
    let mut summary = summarize(&plan.key, &results);
    for cell in &results {
        if cell.outcome.is_err() {
            summary
                .warnings
                .push(format!("{}={} seed {} failed", plan.key, cell.value, cell.seed));
        }
    }
    metrics::emit_summary(&summary, &out_dir)?;
    print_summary(&summary);
    println!(
        "{} cells, {} failed, sweep.csv at {}",
        results.len(),
        failed,
        out_dir.join("sweep.csv").display()
    );
    Ok(if failed > 0 { 4 } else { 0 })
}

fn cmd_report(args: &ReportArgs) -> Result<i32, Error> {
    let reports: Result<Vec<_>, Error> =
        args.reports.iter().map(|p| metrics::read_report(p)).collect();
    let reports = reports?;
    let key = match args.group_by.as_str() {
        "k" => metrics::GroupKey::K,
        "filter_mode" => metrics::GroupKey::FilterMode,
        "seed" => metrics::GroupKey::Seed,
        other => {
            return Err(Error::InvalidConfig(format!(
                "group_by: unknown key {other:?} (expected k, filter_mode or seed)"
            )))
        }
    };
    let summary = metrics::aggregate_sweep(&reports, key);
    let out_dir = PathBuf::from(&args.out_dir);
    metrics::emit_summary(&summary, &out_dir)?;
    print_summary(&summary);
    Ok(0)
}

fn print_summary(summary: &metrics::SweepSummary) {
    println!(
        "{:<14} {:>6} {:>10} {:>10} {:>12} {:>12}",
        summary.group_key, "runs", "acc_mean", "acc_sd", "conf_mean", "conf_sd"
    );
    for g in &summary.groups {
        println!(
            "{:<14} {:>6} {:>10.4} {:>10.4} {:>12.5} {:>12.5}",
            g.value, g.n_runs, g.accuracy_mean, g.accuracy_sd, g.confounding_mean, g.confounding_sd
        );
    }
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
}
