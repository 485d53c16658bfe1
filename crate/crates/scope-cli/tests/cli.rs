//! Black-box tests of the `scope` binary: artifacts, exit codes, overrides.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scope_bin() -> &'static str {
    env!("CARGO_BIN_EXE_scope")
}

fn run_scope(args: &[&str]) -> Output {
    Command::new(scope_bin())
        .args(args)
        .output()
        .expect("spawn scope binary")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("scope_cli_{tag}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SMALL_RUN: &str = r#"
seed = 3

[dataset]
generator = "gaussian_mixture"
n_per_class = 40
classes = 2
dims = 3
class_separation = 4.0
n_labeled = 8
n_test = 20

[backbone]
hidden = [16]
warmup_epochs = 10

[scope]
em_iterations = 2
epochs_per_iteration = 5
k = 2
"#;

#[test]
fn gen_data_is_deterministic_and_counts_match() {
    let dir = temp_dir("gendata");
    let config = write_config(
        &dir,
        "gen.toml",
        "[dataset]\ngenerator = \"gaussian_mixture\"\nn_per_class = 25\nclasses = 3\ndims = 4\n",
    );
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let r = run_scope(&[
            "gen-data",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let csv_a = fs::read(out_a.join("dataset.csv")).unwrap();
    let csv_b = fs::read(out_b.join("dataset.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 1 + 25 * 3);
    assert!(out_a.join("dataset.csv.meta.json").exists());
}

#[test]
fn missing_required_field_exits_2_and_names_it() {
    let dir = temp_dir("missing");
    // No dataset.generator.
    let config = write_config(&dir, "bad.toml", "[dataset]\nn_per_class = 10\n");
    let r = run_scope(&["gen-data", "--config", config.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&r.stderr);
    assert!(stderr.contains("generator"), "stderr: {stderr}");
}

#[test]
fn unknown_field_exits_2() {
    let dir = temp_dir("unknown");
    let config = write_config(
        &dir,
        "typo.toml",
        "[dataset]\ngenerator = \"two_moons\"\nnoize_sd = 0.1\n",
    );
    let r = run_scope(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("noize_sd"));
}

#[test]
fn run_zero_iterations_reports_warmup_only() {
    let dir = temp_dir("warmup_only");
    let config = write_config(&dir, "run.toml", SMALL_RUN);
    let out = dir.join("out");
    let r = run_scope(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--scope.em_iterations=0",
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["iterations"].as_array().unwrap().len(), 1);
    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    assert_eq!(series.lines().count(), 2); // header + warm-up row
}

#[test]
fn dotted_overrides_are_echoed_in_report() {
    let dir = temp_dir("override");
    let config = write_config(&dir, "run.toml", SMALL_RUN);
    let out = dir.join("out");
    let r = run_scope(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--scope.em_iterations=1",
        "--scope.filter_mode=none",
        "--backbone.warmup_epochs=5",
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["scope"]["filter_mode"], "none");
    assert_eq!(report["config"]["scope"]["em_iterations"], 1);
    assert_eq!(report["config"]["backbone"]["warmup_epochs"], 5);
    // Per-iteration record dump exists.
    assert!(out.join("records").join("iter_001.csv").exists());
}

#[test]
fn config_echo_round_trips_field_for_field() {
    let dir = temp_dir("echo");
    let config_path = write_config(&dir, "run.toml", SMALL_RUN);
    let out = dir.join("out");
    let r = run_scope(&[
        "run",
        "--config",
        config_path.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    let echoed: serde_json::Value = serde_json::from_str(&report).unwrap();
    // The echoed config parses back into the exact same config object.
    let reparsed: scope_core::RunConfig =
        serde_json::from_value(echoed["config"].clone()).unwrap();
    let mut original: toml::Value = SMALL_RUN.parse::<toml::Table>().unwrap().into();
    original
        .as_table_mut()
        .unwrap()
        .insert("out_dir".into(), toml::Value::String(out.to_str().unwrap().into()));
    let original: scope_core::RunConfig = original.try_into().unwrap();
    assert_eq!(reparsed, original);
}

#[test]
fn diverging_run_exits_3() {
    let dir = temp_dir("diverge");
    let config = write_config(&dir, "run.toml", SMALL_RUN);
    let r = run_scope(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.join("out").to_str().unwrap(),
        "--backbone.learning_rate=1e307",
    ]);
    assert_eq!(
        r.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&r.stderr)
    );
}

#[test]
fn sweep_produces_aggregated_rows_per_value() {
    let dir = temp_dir("sweep");
    let config = write_config(&dir, "run.toml", SMALL_RUN);
    let out = dir.join("out");
    let r = run_scope(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--key",
        "scope.k",
        "--values",
        "1,2",
        "--seeds",
        "2",
        "--jobs",
        "2",
        "--scope.em_iterations=1",
        "--backbone.warmup_epochs=5",
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    for k in [1, 2] {
        for seed in [3u64, 4] {
            assert!(
                out.join(format!("k_{k}")).join(format!("seed_{seed}")).join("report.json").exists(),
                "missing cell k={k} seed={seed}"
            );
        }
    }
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3); // header + one row per k value
    assert!(sweep.lines().nth(1).unwrap().starts_with("k,1,2,"));
}

#[test]
fn sweep_with_a_diverging_cell_exits_4_and_keeps_going() {
    let dir = temp_dir("sweep_partial");
    let config = write_config(&dir, "run.toml", SMALL_RUN);
    let out = dir.join("out");
    let r = run_scope(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--key",
        "backbone.learning_rate",
        "--values",
        "0.05,1e307",
        "--seeds",
        "1",
        "--scope.em_iterations=1",
        "--backbone.warmup_epochs=5",
    ]);
    assert_eq!(r.status.code(), Some(4), "{}", String::from_utf8_lossy(&r.stderr));
    // The healthy cell completed and the aggregate was still written.
    assert!(out
        .join("learning_rate_0.05")
        .join("seed_3")
        .join("report.json")
        .exists());
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(sweep.lines().any(|l| l.contains("0.05")));
}

#[test]
fn sweep_without_values_exits_2() {
    let dir = temp_dir("sweep_novals");
    let config = write_config(&dir, "run.toml", SMALL_RUN);
    let r = run_scope(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--key",
        "scope.k",
        "--seeds",
        "1",
    ]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn shipped_benchmark_config_completes_quickly() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/benchmark.toml");
    let out = temp_dir("bench_timing").join("out");
    let started = std::time::Instant::now();
    let r = run_scope(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    let elapsed = started.elapsed().as_secs_f64();
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(elapsed < 60.0, "benchmark run took {elapsed:.1}s");
    assert!(out.join("report.json").exists());
    assert!(out.join("model.json").exists());
}

#[test]
fn report_command_aggregates_existing_reports() {
    let dir = temp_dir("report");
    let config = write_config(&dir, "run.toml", SMALL_RUN);
    let mut report_paths = Vec::new();
    for seed in [3, 4] {
        let out = dir.join(format!("r{seed}"));
        let r = run_scope(&[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "--set",
            &format!("seed={seed}"),
            "--scope.em_iterations=1",
            "--backbone.warmup_epochs=5",
        ]);
        assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
        report_paths.push(out.join("report.json"));
    }
    let out = dir.join("agg");
    let r = run_scope(&[
        "report",
        "--group-by",
        "seed",
        "--out-dir",
        out.to_str().unwrap(),
        report_paths[0].to_str().unwrap(),
        report_paths[1].to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3); // header + two seeds
}
