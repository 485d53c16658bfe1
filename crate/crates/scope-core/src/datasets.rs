//! Deterministic dataset generation, outlier injection, splitting, CSV I/O.
//!
//! Generators are pure functions of their parameters and a seed. Labels are
//! never corrupted anywhere in this module: a sample's `hidden_truth` is fixed
//! at generation time and `visible_label`, when present, always equals it.
//! Splitting withholds labels (clears `visible_label` on the unlabeled pool);
//! outlier injection displaces feature vectors but leaves the truth intact, so
//! downstream confounding counts stay well-defined.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_DATA, STREAM_OUTLIERS, STREAM_SPLIT};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Class id visible to the learner; `None` once a sample is in the
    /// unlabeled pool. When present it equals `hidden_truth`.
    pub visible_label: Option<usize>,
    /// Ground truth, for instrumentation only. The training loop never reads
    /// it except to count confounding errors.
    pub hidden_truth: usize,
    pub is_injected_outlier: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub n_classes: usize,
    pub dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, n_classes: usize, dim: usize) -> Result<Self> {
        for s in &samples {
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "Dataset::new features",
                    expected: dim,
                    got: s.features.len(),
                });
            }
            if s.hidden_truth >= n_classes {
                return Err(Error::InvalidInput(format!(
                    "hidden_truth {} out of range for {} classes",
                    s.hidden_truth, n_classes
                )));
            }
        }
        Ok(Dataset {
            samples,
            n_classes,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// How to carve a dataset into labeled / unlabeled / test pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_labeled: usize,
    pub n_test: usize,
    pub seed: u64,
    pub stratified: bool,
}

/// Sidecar metadata written next to dataset CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub seed: Option<u64>,
    pub generator: Option<String>,
    pub params: Option<serde_json::Value>,
}

/// Pooled spread of a dataset: sqrt of the mean per-coordinate population
/// variance. Used to scale outlier displacement and augmentation jitter.
pub fn feature_sd(dataset: &Dataset) -> f64 {
    let n = dataset.len();
    if n == 0 || dataset.dim == 0 {
        return 0.0;
    }
    let d = dataset.dim;
    let mut mean = vec![0.0; d];
    for s in &dataset.samples {
        for (m, &x) in mean.iter_mut().zip(&s.features) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut var_sum = 0.0;
    for s in &dataset.samples {
        for (j, &x) in s.features.iter().enumerate() {
            let dx = x - mean[j];
            var_sum += dx * dx;
        }
    }
    (var_sum / (n as f64 * d as f64)).sqrt()
}

/// One isotropic Gaussian cluster per class, class means evenly spaced on a
/// circle of radius `class_separation` in the first two coordinates.
/// Per-coordinate noise standard deviation is `cov_scale`.
pub fn gen_gaussian_mixture(
    n_per_class: usize,
    classes: usize,
    dims: usize,
    class_separation: f64,
    cov_scale: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::InvalidInput("need at least 2 classes".into()));
    }
    if dims < 2 {
        return Err(Error::InvalidInput("need at least 2 dims".into()));
    }
    if !class_separation.is_finite() || class_separation <= 0.0 {
        return Err(Error::InvalidInput("class_separation must be > 0".into()));
    }
    if cov_scale < 0.0 {
        return Err(Error::InvalidInput("cov_scale must be >= 0".into()));
    }
    let mut rng = stream_rng(seed, STREAM_DATA);
    let mut samples = Vec::with_capacity(n_per_class * classes);
    for c in 0..classes {
        let angle = 2.0 * PI * c as f64 / classes as f64;
        let mut mean = vec![0.0; dims];
        mean[0] = class_separation * angle.cos();
        mean[1] = class_separation * angle.sin();
        for _ in 0..n_per_class {
            let features: Vec<f64> = mean
                .iter()
                .map(|m| {
                    let z: f64 = rng.sample(StandardNormal);
                    m + cov_scale * z
                })
                .collect();
            samples.push(Sample {
                features,
                visible_label: Some(c),
                hidden_truth: c,
                is_injected_outlier: false,
            });
        }
    }
    Dataset::new(samples, classes, dims)
}

/// Returns the class mean used by [`gen_gaussian_mixture`]; handy for oracle
/// computations in tests and benchmarks.
pub fn gaussian_mixture_mean(class: usize, classes: usize, dims: usize, sep: f64) -> Vec<f64> {
    let angle = 2.0 * PI * class as f64 / classes as f64;
    let mut mean = vec![0.0; dims];
    mean[0] = sep * angle.cos();
    mean[1] = sep * angle.sin();
    mean
}

/// Two interleaved half-circles of radius 1; the second moon is the first
/// reflected and offset by (1, 0.5). Gaussian noise on both coordinates.
pub fn gen_two_moons(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidInput("two-moons n must be even".into()));
    }
    if noise_sd < 0.0 {
        return Err(Error::InvalidInput("noise_sd must be >= 0".into()));
    }
    let mut rng = stream_rng(seed, STREAM_DATA);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let t: f64 = rng.random_range(0.0..PI);
        let (x, y) = if class == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        samples.push(Sample {
            features: vec![x + noise_sd * nx, y + noise_sd * ny],
            visible_label: Some(class),
            hidden_truth: class,
            is_injected_outlier: false,
        });
    }
    Dataset::new(samples, 2, 2)
}

/// Displaces a random `fraction` of samples by `displacement_scale` times the
/// dataset's [`feature_sd`], each in its own uniformly random direction.
/// Hidden truth, visible labels and sample count are untouched; only the
/// displaced feature vectors and the `is_injected_outlier` flags change.
pub fn inject_outliers(
    dataset: &Dataset,
    fraction: f64,
    displacement_scale: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(0.0..=0.5).contains(&fraction) {
        return Err(Error::InvalidInput(format!(
            "outlier fraction {fraction} outside [0, 0.5]"
        )));
    }
    if fraction == 0.0 {
        return Ok(dataset.clone());
    }
    let count = (fraction * dataset.len() as f64).round() as usize;
    if count == 0 {
        return Err(Error::InvalidInput(
            "outlier fraction too small for dataset size".into(),
        ));
    }
    let sd = feature_sd(dataset);
    let mut rng = stream_rng(seed, STREAM_OUTLIERS);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    indices.shuffle(&mut rng);
    indices.truncate(count);

    let mut out = dataset.clone();
    for &idx in &indices {
        // Uniform direction: normalized Gaussian draw.
        let mut dir: Vec<f64> = (0..dataset.dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        while norm < 1e-12 {
            for v in dir.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
        let sample = &mut out.samples[idx];
        for (x, d) in sample.features.iter_mut().zip(&dir) {
            *x += displacement_scale * sd * d / norm;
        }
        sample.is_injected_outlier = true;
    }
    Ok(out)
}

/// Splits into (labeled, unlabeled, test). The three parts are disjoint and
/// their union is the input. Unlabeled samples keep their hidden truth but
/// lose their visible label.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let n = dataset.len();
    if spec.n_labeled + spec.n_test > n {
        return Err(Error::Split(format!(
            "n_labeled {} + n_test {} exceeds dataset size {}",
            spec.n_labeled, spec.n_test, n
        )));
    }
    let mut rng = stream_rng(spec.seed, STREAM_SPLIT);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let (labeled_idx, test_idx): (Vec<usize>, Vec<usize>) = if spec.stratified {
        if spec.n_labeled < dataset.n_classes {
            return Err(Error::Split(format!(
                "stratified split needs n_labeled >= {} classes, got {}",
                dataset.n_classes, spec.n_labeled
            )));
        }
        let c = dataset.n_classes;
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
        for &idx in &order {
            by_class[dataset.samples[idx].hidden_truth].push(idx);
        }
        let mut labeled = Vec::with_capacity(spec.n_labeled);
        let mut test = Vec::with_capacity(spec.n_test);
        for (class, members) in by_class.iter().enumerate() {
            let quota_l = spec.n_labeled / c + usize::from(class < spec.n_labeled % c);
            let quota_t = spec.n_test / c + usize::from(class < spec.n_test % c);
            if members.len() < quota_l + quota_t {
                return Err(Error::Split(format!(
                    "class {class} has {} samples, needs {} for stratified split",
                    members.len(),
                    quota_l + quota_t
                )));
            }
            labeled.extend_from_slice(&members[..quota_l]);
            test.extend_from_slice(&members[quota_l..quota_l + quota_t]);
        }
        (labeled, test)
    } else {
        (
            order[..spec.n_labeled].to_vec(),
            order[spec.n_labeled..spec.n_labeled + spec.n_test].to_vec(),
        )
    };

    let mut role = vec![2u8; n]; // 0 labeled, 1 test, 2 unlabeled
    for &i in &labeled_idx {
        role[i] = 0;
    }
    for &i in &test_idx {
        role[i] = 1;
    }

    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    let mut test = Vec::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        match role[i] {
            0 => labeled.push(Sample {
                visible_label: Some(s.hidden_truth),
                ..s.clone()
            }),
            1 => test.push(Sample {
                visible_label: Some(s.hidden_truth),
                ..s.clone()
            }),
            _ => unlabeled.push(Sample {
                visible_label: None,
                ..s.clone()
            }),
        }
    }
    let c = dataset.n_classes;
    let d = dataset.dim;
    Ok((
        Dataset::new(labeled, c, d)?,
        Dataset::new(unlabeled, c, d)?,
        Dataset::new(test, c, d)?,
    ))
}

const META_SUFFIX: &str = ".meta.json";

fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(META_SUFFIX);
    std::path::PathBuf::from(s)
}

/// Writes the CSV (`f0..f{D-1},visible_label,hidden_truth,is_outlier`, floats
/// at 17 significant digits) plus a `<path>.meta.json` sidecar.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    save_csv_with_meta(
        dataset,
        path,
        &DatasetMeta {
            n: dataset.len(),
            d: dataset.dim,
            c: dataset.n_classes,
            seed: None,
            generator: None,
            params: None,
        },
    )
}

pub fn save_csv_with_meta(dataset: &Dataset, path: &Path, meta: &DatasetMeta) -> Result<()> {
    let mut out = String::new();
    for j in 0..dataset.dim {
        out.push_str(&format!("f{j},"));
    }
    out.push_str("visible_label,hidden_truth,is_outlier\n");
    for s in &dataset.samples {
        for x in &s.features {
            // 17 significant digits round-trips f64 exactly.
            out.push_str(&format!("{x:.16e},"));
        }
        match s.visible_label {
            Some(c) => out.push_str(&format!("{c},")),
            None => out.push(','),
        }
        out.push_str(&format!(
            "{},{}\n",
            s.hidden_truth,
            u8::from(s.is_injected_outlier)
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))?;
    let meta_text = serde_json::to_string_pretty(meta)?;
    let mp = meta_path(path);
    fs::write(&mp, meta_text).map_err(|e| Error::io(mp.display().to_string(), e))?;
    Ok(())
}

/// Loads a dataset CSV. When the `<path>.meta.json` sidecar is present its
/// class count is trusted; otherwise the class count is inferred from the
/// largest hidden truth seen.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::CsvParse {
        line: 1,
        msg: "empty file, expected header".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[cols.len() - 3..] != ["visible_label", "hidden_truth", "is_outlier"] {
        return Err(Error::CsvParse {
            line: 1,
            msg: "header must end with visible_label,hidden_truth,is_outlier".into(),
        });
    }
    let dim = cols.len() - 3;
    for (j, col) in cols[..dim].iter().enumerate() {
        if *col != format!("f{j}") {
            return Err(Error::CsvParse {
                line: 1,
                msg: format!("expected feature column f{j}, found {col}"),
            });
        }
    }

    let mut samples = Vec::new();
    let mut max_truth = 0usize;
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 3 {
            return Err(Error::CsvParse {
                line: line_no,
                msg: format!("expected {} fields, found {}", dim + 3, fields.len()),
            });
        }
        let mut features = Vec::with_capacity(dim);
        for (j, f) in fields[..dim].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| Error::CsvParse {
                line: line_no,
                msg: format!("non-numeric feature f{j}: {f:?}"),
            })?;
            features.push(v);
        }
        let visible_label = if fields[dim].is_empty() {
            None
        } else {
            Some(fields[dim].parse::<usize>().map_err(|_| Error::CsvParse {
                line: line_no,
                msg: format!("bad visible_label: {:?}", fields[dim]),
            })?)
        };
        let hidden_truth = fields[dim + 1]
            .parse::<usize>()
            .map_err(|_| Error::CsvParse {
                line: line_no,
                msg: format!("bad hidden_truth: {:?}", fields[dim + 1]),
            })?;
        let is_injected_outlier = match fields[dim + 2] {
            "0" | "false" => false,
            "1" | "true" => true,
            other => {
                return Err(Error::CsvParse {
                    line: line_no,
                    msg: format!("bad is_outlier flag: {other:?}"),
                })
            }
        };
        max_truth = max_truth.max(hidden_truth);
        samples.push(Sample {
            features,
            visible_label,
            hidden_truth,
            is_injected_outlier,
        });
    }

    let n_classes = match read_meta(path)? {
        Some(meta) => meta.c,
        None if samples.is_empty() => 0,
        None => max_truth + 1,
    };
    Dataset::new(samples, n_classes, dim)
}

pub fn read_meta(path: &Path) -> Result<Option<DatasetMeta>> {
    let mp = meta_path(path);
    if !mp.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(mp.display().to_string(), e))?;
    Ok(Some(serde_json::from_str(&text)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_mixture_is_deterministic() {
        let a = gen_gaussian_mixture(20, 3, 4, 5.0, 1.0, 9).unwrap();
        let b = gen_gaussian_mixture(20, 3, 4, 5.0, 1.0, 9).unwrap();
        assert_eq!(a, b);
        let c = gen_gaussian_mixture(20, 3, 4, 5.0, 1.0, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_cov_collapses_to_class_means() {
        let d = gen_gaussian_mixture(5, 3, 4, 2.0, 0.0, 1).unwrap();
        for s in &d.samples {
            let mean = gaussian_mixture_mean(s.hidden_truth, 3, 4, 2.0);
            for (x, m) in s.features.iter().zip(&mean) {
                assert!((x - m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_moons_zero_noise_lies_on_circles() {
        let d = gen_two_moons(100, 0.0, 3).unwrap();
        for s in &d.samples {
            let (x, y) = (s.features[0], s.features[1]);
            let r = if s.hidden_truth == 0 {
                (x * x + y * y).sqrt()
            } else {
                ((x - 1.0).powi(2) + (y - 0.5).powi(2)).sqrt()
            };
            assert!((r - 1.0).abs() < 1e-12, "radius {r}");
        }
    }

    #[test]
    fn two_moons_requires_even_n() {
        assert!(gen_two_moons(99, 0.1, 1).is_err());
        assert_eq!(
            gen_two_moons(60, 0.1, 4).unwrap(),
            gen_two_moons(60, 0.1, 4).unwrap()
        );
    }

    #[test]
    fn inject_zero_fraction_is_identity() {
        let d = gen_gaussian_mixture(10, 2, 3, 3.0, 1.0, 2).unwrap();
        assert_eq!(inject_outliers(&d, 0.0, 5.0, 7).unwrap(), d);
    }

    #[test]
    fn inject_flags_exact_count_and_keeps_truth() {
        let d = gen_gaussian_mixture(500, 2, 3, 3.0, 1.0, 2).unwrap();
        let out = inject_outliers(&d, 0.1, 5.0, 7).unwrap();
        assert_eq!(out.len(), d.len());
        let flagged = out.samples.iter().filter(|s| s.is_injected_outlier).count();
        assert_eq!(flagged, 100);
        for (a, b) in d.samples.iter().zip(&out.samples) {
            assert_eq!(a.hidden_truth, b.hidden_truth);
            assert_eq!(a.visible_label, b.visible_label);
        }
    }

    #[test]
    fn displaced_samples_are_farther_from_class_centroids() {
        let d = gen_gaussian_mixture(300, 3, 4, 4.0, 1.0, 11).unwrap();
        let out = inject_outliers(&d, 0.1, 5.0, 13).unwrap();
        // Per-class centroids over non-displaced samples.
        for class in 0..3 {
            let inliers: Vec<&Sample> = out
                .samples
                .iter()
                .filter(|s| s.hidden_truth == class && !s.is_injected_outlier)
                .collect();
            let outliers: Vec<&Sample> = out
                .samples
                .iter()
                .filter(|s| s.hidden_truth == class && s.is_injected_outlier)
                .collect();
            assert!(!outliers.is_empty());
            let mut centroid = vec![0.0; out.dim];
            for s in &inliers {
                for (c, x) in centroid.iter_mut().zip(&s.features) {
                    *c += x;
                }
            }
            for c in centroid.iter_mut() {
                *c /= inliers.len() as f64;
            }
            let mean_dist = |set: &[&Sample]| {
                set.iter()
                    .map(|s| {
                        s.features
                            .iter()
                            .zip(&centroid)
                            .map(|(x, c)| (x - c) * (x - c))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .sum::<f64>()
                    / set.len() as f64
            };
            assert!(mean_dist(&outliers) > mean_dist(&inliers));
        }
    }

    #[test]
    fn split_can_leave_unlabeled_empty() {
        let d = gen_gaussian_mixture(10, 2, 2, 3.0, 1.0, 5).unwrap();
        let spec = SplitSpec {
            n_labeled: 16,
            n_test: 4,
            seed: 1,
            stratified: false,
        };
        let (l, u, t) = split(&d, &spec).unwrap();
        assert_eq!(l.len(), 16);
        assert_eq!(u.len(), 0);
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn stratified_split_balances_classes() {
        let d = gen_gaussian_mixture(100, 10, 3, 6.0, 1.0, 5).unwrap();
        let spec = SplitSpec {
            n_labeled: 250,
            n_test: 100,
            seed: 2,
            stratified: true,
        };
        let (l, _, t) = split(&d, &spec).unwrap();
        for class in 0..10 {
            let nl = l.samples.iter().filter(|s| s.hidden_truth == class).count();
            assert_eq!(nl, 25);
            let nt = t.samples.iter().filter(|s| s.hidden_truth == class).count();
            assert_eq!(nt, 10);
        }
    }

    #[test]
    fn split_is_a_partition() {
        let d = gen_gaussian_mixture(50, 3, 4, 4.0, 1.0, 8).unwrap();
        let spec = SplitSpec {
            n_labeled: 30,
            n_test: 20,
            seed: 3,
            stratified: true,
        };
        let (l, u, t) = split(&d, &spec).unwrap();
        assert_eq!(l.len() + u.len() + t.len(), d.len());
        // Compare as multisets of feature vectors (visible labels differ by
        // design on the unlabeled part).
        let mut all: Vec<Vec<u64>> = d
            .samples
            .iter()
            .map(|s| s.features.iter().map(|x| x.to_bits()).collect())
            .collect();
        let mut parts: Vec<Vec<u64>> = l
            .samples
            .iter()
            .chain(&u.samples)
            .chain(&t.samples)
            .map(|s| s.features.iter().map(|x| x.to_bits()).collect())
            .collect();
        all.sort();
        parts.sort();
        assert_eq!(all, parts);
        assert!(u.samples.iter().all(|s| s.visible_label.is_none()));
        assert!(l.samples.iter().all(|s| s.visible_label == Some(s.hidden_truth)));
    }

    #[test]
    fn stratified_split_errors_when_class_is_short() {
        let d = gen_gaussian_mixture(5, 2, 2, 3.0, 1.0, 5).unwrap();
        let spec = SplitSpec {
            n_labeled: 8,
            n_test: 4,
            seed: 1,
            stratified: true,
        };
        assert!(matches!(split(&d, &spec), Err(Error::Split(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let tmp = std::env::temp_dir().join("scope_csv_roundtrip.csv");
        let d = {
            let base = gen_gaussian_mixture(25, 3, 4, 4.0, 1.0, 6).unwrap();
            let spec = SplitSpec {
                n_labeled: 10,
                n_test: 5,
                seed: 1,
                stratified: false,
            };
            let (_, u, _) = split(&base, &spec).unwrap();
            u // contains samples without visible labels
        };
        save_csv(&d, &tmp).unwrap();
        let back = load_csv(&tmp).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn empty_dataset_writes_header_only() {
        let tmp = std::env::temp_dir().join("scope_csv_empty.csv");
        let d = Dataset::new(vec![], 2, 3).unwrap();
        save_csv(&d, &tmp).unwrap();
        let text = fs::read_to_string(&tmp).unwrap();
        assert_eq!(text, "f0,f1,f2,visible_label,hidden_truth,is_outlier\n");
        let back = load_csv(&tmp).unwrap();
        assert_eq!(back.len(), 0);
        assert_eq!(back.dim, 3);
    }

    #[test]
    fn parse_error_names_the_line() {
        let tmp = std::env::temp_dir().join("scope_csv_badline.csv");
        fs::write(
            &tmp,
            "f0,f1,visible_label,hidden_truth,is_outlier\n\
             1.0,2.0,0,0,0\n\
             1.0,oops,1,1,0\n",
        )
        .unwrap();
        match load_csv(&tmp) {
            Err(Error::CsvParse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("f1"), "msg: {msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn feature_sd_matches_hand_computation() {
        let d = Dataset::new(
            vec![
                Sample {
                    features: vec![0.0, 0.0],
                    visible_label: Some(0),
                    hidden_truth: 0,
                    is_injected_outlier: false,
                },
                Sample {
                    features: vec![2.0, 0.0],
                    visible_label: Some(0),
                    hidden_truth: 0,
                    is_injected_outlier: false,
                },
            ],
            1,
            2,
        )
        .unwrap();
        // Coordinate variances: (1, 0); mean 0.5; sqrt = 0.7071...
        assert!((feature_sd(&d) - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
