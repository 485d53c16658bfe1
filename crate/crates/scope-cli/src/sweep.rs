//! Sweep execution: the cross product of one swept config field and a seed
//! range, run as independent deterministic children, then aggregated.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use scope_core::engine::{self, RunOutcome};
use scope_core::metrics::{self, GroupKey, RunReport, SweepSummary};
use scope_core::{Error, RunConfig};

use crate::config_io::{parse_override, set_path};

pub struct SweepPlan {
    pub key: String,
    pub values: Vec<String>,
    pub seeds: usize,
    pub jobs: usize,
}

pub struct CellResult {
    pub value: String,
    pub seed: u64,
    pub dir: PathBuf,
    pub outcome: Result<RunOutcome, Error>,
}

/// Builds one child config per (value, seed) cell. Seeds are base_seed +
/// offset, so extending the seed range never changes existing cells.
fn cell_config(base: &RunConfig, key: &str, value: &str, seed: u64) -> Result<RunConfig, Error> {
    let mut tree: toml::Value = toml::Value::try_from(base.clone())
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let (path, v) = parse_override(&format!("{key}={value}"))?;
    set_path(&mut tree, &path, v)?;
    set_path(
        &mut tree,
        &["seed".to_string()],
        toml::Value::Integer(seed as i64),
    )?;
    let config: RunConfig = tree
        .try_into()
        .map_err(|e| Error::InvalidConfig(format!("{key}={value}: {e}")))?;
    config.validate()?;
    Ok(config)
}

fn key_leaf(key: &str) -> &str {
    key.rsplit('.').next().unwrap_or(key)
}

/// Runs every cell (values x seeds), writing one report directory per cell
/// under `out_dir`, at most `jobs` cells in flight.
pub fn run_sweep(base: &RunConfig, plan: &SweepPlan, out_dir: &Path) -> Result<Vec<CellResult>, Error> {
    if plan.values.is_empty() {
        return Err(Error::InvalidConfig("sweep values list is empty".into()));
    }
    if plan.seeds == 0 {
        return Err(Error::InvalidConfig("sweep needs at least one seed".into()));
    }

    struct Cell {
        value: String,
        seed: u64,
        dir: PathBuf,
        config: RunConfig,
    }

    let leaf = key_leaf(&plan.key);
    let mut cells = Vec::new();
    for value in &plan.values {
        for offset in 0..plan.seeds {
            let seed = base.seed + offset as u64;
            let mut config = cell_config(base, &plan.key, value, seed)?;
            let dir = out_dir.join(format!("{leaf}_{value}")).join(format!("seed_{seed}"));
            config.out_dir = dir.display().to_string();
            cells.push(Cell {
                value: value.clone(),
                seed,
                dir,
                config,
            });
        }
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CellResult>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    let workers = plan.jobs.max(1).min(cells.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let cell = &cells[i];
                let outcome = engine::run(&cell.config).and_then(|outcome| {
                    write_run_artifacts(&outcome, &cell.dir)?;
                    Ok(outcome)
                });
                let mut guard = results.lock().expect("results lock");
                guard[i] = Some(CellResult {
                    value: cell.value.clone(),
                    seed: cell.seed,
                    dir: cell.dir.clone(),
                    outcome,
                });
            });
        }
    });

    Ok(results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every cell recorded"))
        .collect())
}

/// report.json, series.csv, model.json and per-iteration record dumps.
pub fn write_run_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<(), Error> {
    metrics::emit_report(&outcome.report, dir)?;
    let model_path = dir.join("model.json");
    std::fs::write(&model_path, outcome.final_params.to_json())
        .map_err(|e| Error::io(model_path.display().to_string(), e))?;
    let records_dir = dir.join("records");
    std::fs::create_dir_all(&records_dir)
        .map_err(|e| Error::io(records_dir.display().to_string(), e))?;
    for (i, records) in outcome.records_per_iteration.iter().enumerate() {
        let path = records_dir.join(format!("iter_{:03}.csv", i + 1));
        std::fs::write(&path, engine::records_csv(records))
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// Aggregates completed cells. Sweeps over the three canonical keys reuse the
/// report-derived grouping; any other key groups by the swept value directly.
pub fn summarize(key: &str, results: &[CellResult]) -> SweepSummary {
    let reports: Vec<&RunReport> = results
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|o| &o.report))
        .collect();
    match key {
        "scope.k" | "k" => {
            let owned: Vec<RunReport> = reports.iter().map(|r| (*r).clone()).collect();
            metrics::aggregate_sweep(&owned, GroupKey::K)
        }
        "scope.filter_mode" | "filter_mode" => {
            let owned: Vec<RunReport> = reports.iter().map(|r| (*r).clone()).collect();
            metrics::aggregate_sweep(&owned, GroupKey::FilterMode)
        }
        "seed" => {
            let owned: Vec<RunReport> = reports.iter().map(|r| (*r).clone()).collect();
            metrics::aggregate_sweep(&owned, GroupKey::Seed)
        }
        other => {
            let mut order: Vec<String> = Vec::new();
            for r in results {
                if !order.contains(&r.value) {
                    order.push(r.value.clone());
                }
            }
            let groups = order
                .into_iter()
                .map(|v| {
                    let members: Vec<&RunReport> = results
                        .iter()
                        .filter(|r| r.value == v)
                        .filter_map(|r| r.outcome.as_ref().ok().map(|o| &o.report))
                        .collect();
                    (v, members)
                })
                .collect();
            metrics::summarize_groups(key_leaf(other), groups)
        }
    }
}
