//! Accuracy, confidence intervals, sweep aggregation, and report emission.
//!
//! Reports are pure summaries: everything in them can be re-derived from the
//! per-iteration record dumps. File contents are deterministic functions of
//! their inputs (the wall-clock field is excluded from any determinism
//! contract).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// Fraction of predictions equal to the truth.
pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "accuracy",
            expected: truth.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::InvalidInput("accuracy over empty vectors".into()));
    }
    let hits = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Normal-approximation binomial interval:
/// p_hat +/- z * sqrt(p_hat (1 - p_hat) / n), clamped to [0, 1].
pub fn binomial_interval(p_hat: f64, n: usize, z: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidInput("binomial_interval needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::InvalidInput(format!(
            "p_hat {p_hat} outside [0, 1]"
        )));
    }
    let half = z * (p_hat * (1.0 - p_hat) / n as f64).sqrt();
    Ok(((p_hat - half).max(0.0), (p_hat + half).min(1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub t: usize,
    pub accuracy: f64,
    pub confounding_rate: f64,
    pub n_promoted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub accuracy: f64,
    pub ci: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub iterations: Vec<IterationRow>,
    #[serde(rename = "final")]
    pub final_metrics: FinalMetrics,
    pub seed: u64,
    pub runtime_s: f64,
}

impl RunReport {
    /// Mean confounding rate over real EM iterations (the warm-up row carries
    /// no promotions and is excluded). Zero when no EM iterations ran.
    pub fn mean_confounding_rate(&self) -> f64 {
        let rows: Vec<&IterationRow> = self.iterations.iter().filter(|r| r.t > 0).collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().map(|r| r.confounding_rate).sum::<f64>() / rows.len() as f64
    }

    pub fn final_accuracy(&self) -> f64 {
        self.final_metrics.accuracy
    }
}

/// Which config field a sweep groups by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    K,
    FilterMode,
    Seed,
}

impl GroupKey {
    pub fn name(self) -> &'static str {
        match self {
            GroupKey::K => "k",
            GroupKey::FilterMode => "filter_mode",
            GroupKey::Seed => "seed",
        }
    }

    pub fn value_of(self, report: &RunReport) -> String {
        match self {
            GroupKey::K => report.config.scope.k.to_string(),
            GroupKey::FilterMode => report.config.scope.filter_mode.to_string(),
            GroupKey::Seed => report.seed.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGroup {
    pub value: String,
    pub n_runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_sd: f64,
    pub confounding_mean: f64,
    pub confounding_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub group_key: String,
    pub groups: Vec<SweepGroup>,
    pub warnings: Vec<String>,
}

fn mean_and_sample_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregates labeled groups of reports into per-group mean / sample-sd of
/// final accuracy and per-run mean confounding rate. Labels with no reports
/// are dropped with a warning. Groups sort numerically when every label
/// parses as a number, lexicographically otherwise.
pub fn summarize_groups(key_name: &str, groups: Vec<(String, Vec<&RunReport>)>) -> SweepSummary {
    let mut warnings = Vec::new();
    let mut out = Vec::new();
    for (value, reports) in groups {
        if reports.is_empty() {
            warnings.push(format!("group {key_name}={value} has no reports; excluded"));
            continue;
        }
        let acc: Vec<f64> = reports.iter().map(|r| r.final_accuracy()).collect();
        let conf: Vec<f64> = reports.iter().map(|r| r.mean_confounding_rate()).collect();
        let (accuracy_mean, accuracy_sd) = mean_and_sample_sd(&acc);
        let (confounding_mean, confounding_sd) = mean_and_sample_sd(&conf);
        out.push(SweepGroup {
            value,
            n_runs: reports.len(),
            accuracy_mean,
            accuracy_sd,
            confounding_mean,
            confounding_sd,
        });
    }
    let all_numeric = out.iter().all(|g| g.value.parse::<f64>().is_ok());
    if all_numeric {
        out.sort_by(|a, b| {
            a.value
                .parse::<f64>()
                .unwrap()
                .partial_cmp(&b.value.parse::<f64>().unwrap())
                .unwrap()
        });
    } else {
        out.sort_by(|a, b| a.value.cmp(&b.value));
    }
    SweepSummary {
        group_key: key_name.to_string(),
        groups: out,
        warnings,
    }
}

/// Groups reports by the given key and aggregates them.
pub fn aggregate_sweep(reports: &[RunReport], group_key: GroupKey) -> SweepSummary {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: std::collections::HashMap<String, Vec<&RunReport>> =
        std::collections::HashMap::new();
    for r in reports {
        let value = group_key.value_of(r);
        if !grouped.contains_key(&value) {
            order.push(value.clone());
        }
        grouped.entry(value).or_default().push(r);
    }
    let groups: Vec<(String, Vec<&RunReport>)> = order
        .into_iter()
        .map(|v| {
            let rs = grouped.remove(&v).unwrap_or_default();
            (v, rs)
        })
        .collect();
    summarize_groups(group_key.name(), groups)
}

/// Writes `report.json` and `series.csv`
/// (`iteration,accuracy,confounding_rate,n_promoted`) into `out_dir`.
pub fn emit_report(report: &RunReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let json_path = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(report)?;
    fs::write(&json_path, json).map_err(|e| Error::io(json_path.display().to_string(), e))?;

    let csv_path = out_dir.join("series.csv");
    let mut csv = String::from("iteration,accuracy,confounding_rate,n_promoted\n");
    for row in &report.iterations {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.t, row.accuracy, row.confounding_rate, row.n_promoted
        ));
    }
    fs::write(&csv_path, csv).map_err(|e| Error::io(csv_path.display().to_string(), e))?;
    Ok(())
}

/// Writes `sweep.csv` with one aggregated row per group.
pub fn emit_summary(summary: &SweepSummary, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let path = out_dir.join("sweep.csv");
    let mut csv = String::from(
        "group_key,value,n_runs,accuracy_mean,accuracy_sd,confounding_mean,confounding_sd\n",
    );
    for g in &summary.groups {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            summary.group_key,
            g.value,
            g.n_runs,
            g.accuracy_mean,
            g.accuracy_sd,
            g.confounding_mean,
            g.confounding_sd
        ));
    }
    fs::write(&path, csv).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GeneratorKind;

    fn report_with(acc: f64, conf: &[f64], k: usize, seed: u64) -> RunReport {
        let mut config = RunConfig::defaults(GeneratorKind::GaussianMixture);
        config.scope.k = k;
        config.seed = seed;
        let mut iterations = vec![IterationRow {
            t: 0,
            accuracy: 0.5,
            confounding_rate: 0.0,
            n_promoted: 0,
        }];
        for (i, &c) in conf.iter().enumerate() {
            iterations.push(IterationRow {
                t: i + 1,
                accuracy: acc,
                confounding_rate: c,
                n_promoted: 5,
            });
        }
        RunReport {
            config,
            iterations,
            final_metrics: FinalMetrics {
                accuracy: acc,
                ci: [acc - 0.01, acc + 0.01],
            },
            seed,
            runtime_s: 0.1,
        }
    }

    #[test]
    fn accuracy_basics() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 2, 3], &[4, 5, 6]).unwrap(), 0.0);
        assert_eq!(
            accuracy(&[1, 1, 1, 1, 0, 0, 0, 0, 2, 2], &[1, 1, 1, 1, 1, 1, 1, 2, 2, 0]).unwrap(),
            0.5
        );
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn interval_matches_hand_arithmetic() {
        let (lo, hi) = binomial_interval(0.5, 100, 1.96).unwrap();
        assert!((lo - 0.402).abs() < 1e-12);
        assert!((hi - 0.598).abs() < 1e-12);
    }

    #[test]
    fn interval_degenerate_at_boundaries() {
        assert_eq!(binomial_interval(0.0, 50, 1.96).unwrap(), (0.0, 0.0));
        assert_eq!(binomial_interval(1.0, 50, 1.96).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn interval_width_halves_when_n_quadruples() {
        let (lo1, hi1) = binomial_interval(0.7, 250, 1.96).unwrap();
        let (lo2, hi2) = binomial_interval(0.7, 1000, 1.96).unwrap();
        let ratio = (hi2 - lo2) / (hi1 - lo1);
        assert!((ratio - 0.5).abs() < 0.005, "ratio {ratio}");
    }

    #[test]
    fn single_report_group_has_zero_sd() {
        let reports = vec![report_with(0.9, &[0.02, 0.04], 3, 1)];
        let summary = aggregate_sweep(&reports, GroupKey::K);
        assert_eq!(summary.groups.len(), 1);
        let g = &summary.groups[0];
        assert_eq!(g.n_runs, 1);
        assert!((g.accuracy_mean - 0.9).abs() < 1e-12);
        assert_eq!(g.accuracy_sd, 0.0);
        assert!((g.confounding_mean - 0.03).abs() < 1e-12);
    }

    #[test]
    fn identical_reports_have_zero_sd() {
        let reports = vec![
            report_with(0.8, &[0.1], 2, 1),
            report_with(0.8, &[0.1], 2, 1),
        ];
        let summary = aggregate_sweep(&reports, GroupKey::K);
        assert_eq!(summary.groups[0].accuracy_sd, 0.0);
        assert_eq!(summary.groups[0].confounding_sd, 0.0);
    }

    #[test]
    fn three_report_fixture_matches_hand_mean_sd() {
        let reports = vec![
            report_with(0.80, &[0.10], 4, 1),
            report_with(0.90, &[0.20], 4, 2),
            report_with(0.85, &[0.30], 4, 3),
        ];
        let summary = aggregate_sweep(&reports, GroupKey::K);
        let g = &summary.groups[0];
        assert_eq!(g.n_runs, 3);
        assert!((g.accuracy_mean - 0.85).abs() < 1e-12);
        // sample sd of {0.80, 0.90, 0.85} = 0.05
        assert!((g.accuracy_sd - 0.05).abs() < 1e-12);
        assert!((g.confounding_mean - 0.20).abs() < 1e-12);
        assert!((g.confounding_sd - 0.10).abs() < 1e-12);
    }

    #[test]
    fn groups_sort_numerically_for_k() {
        let reports: Vec<RunReport> = [6, 1, 3]
            .iter()
            .map(|&k| report_with(0.8, &[0.1], k, k as u64))
            .collect();
        let summary = aggregate_sweep(&reports, GroupKey::K);
        let values: Vec<&str> = summary.groups.iter().map(|g| g.value.as_str()).collect();
        assert_eq!(values, ["1", "3", "6"]);
    }

    #[test]
    fn empty_group_is_excluded_with_warning() {
        let r = report_with(0.8, &[0.1], 1, 1);
        let summary = summarize_groups(
            "k",
            vec![("1".into(), vec![&r]), ("2".into(), vec![])],
        );
        assert_eq!(summary.groups.len(), 1);
        assert_eq!(summary.warnings.len(), 1);
        assert!(summary.warnings[0].contains("k=2"));
    }

    #[test]
    fn emit_and_read_back_round_trip() {
        let dir = std::env::temp_dir().join("scope_metrics_emit");
        let report = report_with(0.88, &[0.05, 0.03, 0.02], 5, 9);
        emit_report(&report, &dir).unwrap();
        let back = read_report(&dir.join("report.json")).unwrap();
        assert_eq!(report, back);

        let series = fs::read_to_string(dir.join("series.csv")).unwrap();
        let lines: Vec<&str> = series.lines().collect();
        // warm-up row + one per iteration + header
        assert_eq!(lines.len(), 1 + report.iterations.len());
        assert_eq!(lines[0], "iteration,accuracy,confounding_rate,n_promoted");
    }

    #[test]
    fn sweep_csv_has_one_row_per_group() {
        let dir = std::env::temp_dir().join("scope_metrics_sweep");
        let reports: Vec<RunReport> = (1..=6)
            .map(|k| report_with(0.8 + 0.01 * k as f64, &[0.1 / k as f64], k, k as u64))
            .collect();
        let summary = aggregate_sweep(&reports, GroupKey::K);
        emit_summary(&summary, &dir).unwrap();
        let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 7); // header + 6 groups
    }
}
