//! Run configuration: one struct tree covering dataset, backbone, augmentation
//! and the pseudolabeling loop. Every field has a documented default so a
//! minimal config only names a generator; validation errors carry the dotted
//! field path for CLI reporting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    GaussianMixture,
    TwoMoons,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    None,
    Gaussian,
    Knn,
    Both,
}

impl FilterMode {
    pub fn gaussian_enabled(self) -> bool {
        matches!(self, FilterMode::Gaussian | FilterMode::Both)
    }

    pub fn knn_enabled(self) -> bool {
        matches!(self, FilterMode::Knn | FilterMode::Both)
    }
}

impl std::fmt::Display for FilterMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FilterMode::None => "none",
            FilterMode::Gaussian => "gaussian",
            FilterMode::Knn => "knn",
            FilterMode::Both => "both",
        };
        f.write_str(s)
    }
}

/// Which backbone output the kNN filter compares: last hidden activations or
/// output probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    Penultimate,
    Probabilities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub generator: GeneratorKind,

    // gaussian_mixture
    #[serde(default = "d_n_per_class")]
    pub n_per_class: usize,
    #[serde(default = "d_classes")]
    pub classes: usize,
    #[serde(default = "d_dims")]
    pub dims: usize,
    /// Radius of the circle the class means sit on, in feature units.
    #[serde(default = "d_separation")]
    pub class_separation: f64,
    #[serde(default = "d_one")]
    pub cov_scale: f64,

    // two_moons
    #[serde(default = "d_moons_n")]
    pub n: usize,
    #[serde(default = "d_noise_sd")]
    pub noise_sd: f64,

    // csv
    #[serde(default)]
    pub path: Option<String>,

    /// Fraction of the unlabeled pool displaced as outliers.
    #[serde(default)]
    pub outlier_fraction: f64,
    /// Displacement in multiples of the pool's feature spread.
    #[serde(default = "d_outlier_scale")]
    pub outlier_scale: f64,

    #[serde(default = "d_n_labeled")]
    pub n_labeled: usize,
    #[serde(default = "d_n_test")]
    pub n_test: usize,
    #[serde(default = "d_true")]
    pub stratified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackboneConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub warmup_epochs: usize,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            hidden: vec![64, 64],
            learning_rate: 0.05,
            batch_size: 32,
            warmup_epochs: 50,
        }
    }
}

/// Jitter strengths as multiples of the dataset's feature spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub weak_jitter_factor: f64,
    pub strong_jitter_factor: f64,
    pub strong_dropout_fraction: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            weak_jitter_factor: 0.02,
            strong_jitter_factor: 0.15,
            strong_dropout_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScopeConfig {
    pub confidence_threshold: f64,
    /// Weight of the masked unsupervised loss.
    pub lambda_u: f64,
    pub em_iterations: usize,
    pub epochs_per_iteration: usize,
    pub filter_mode: FilterMode,
    /// Cosine similarity threshold of the kNN filter.
    pub gamma: f64,
    /// Required count of similar same-class labeled neighbors.
    pub k: usize,
    /// Refit-and-rescore rounds of the Gaussian filter.
    pub refinement_rounds: usize,
    pub manifold: Manifold,
    /// Harness mode: additionally require pseudolabels to be correct before
    /// promotion or training (the counterfactual with confounding errors
    /// forcibly removed).
    pub oracle_filter: bool,
    /// When set, promoted samples return to the unlabeled pool at the start
    /// of every iteration instead of staying promoted.
    pub repseudolabel: bool,
}

impl Default for ScopeConfig {
    fn default() -> Self {
        ScopeConfig {
            confidence_threshold: 0.95,
            lambda_u: 1.0,
            em_iterations: 10,
            epochs_per_iteration: 30,
            filter_mode: FilterMode::Both,
            gamma: 0.8,
            k: 3,
            refinement_rounds: 3,
            manifold: Manifold::Penultimate,
            oracle_filter: false,
            repseudolabel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_out_dir")]
    pub out_dir: String,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub backbone: BackboneConfig,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub scope: ScopeConfig,
}

fn d_n_per_class() -> usize {
    300
}
fn d_classes() -> usize {
    4
}
fn d_dims() -> usize {
    8
}
fn d_separation() -> f64 {
    4.0
}
fn d_one() -> f64 {
    1.0
}
fn d_moons_n() -> usize {
    1200
}
fn d_noise_sd() -> f64 {
    0.1
}
fn d_outlier_scale() -> f64 {
    5.0
}
fn d_n_labeled() -> usize {
    20
}
fn d_n_test() -> usize {
    400
}
fn d_true() -> bool {
    true
}
fn d_out_dir() -> String {
    "out".into()
}

impl RunConfig {
    /// A complete config for the given generator with every default applied.
    pub fn defaults(generator: GeneratorKind) -> Self {
        RunConfig {
            seed: 0,
            out_dir: d_out_dir(),
            dataset: DatasetConfig {
                generator,
                n_per_class: d_n_per_class(),
                classes: d_classes(),
                dims: d_dims(),
                class_separation: d_separation(),
                cov_scale: d_one(),
                n: d_moons_n(),
                noise_sd: d_noise_sd(),
                path: None,
                outlier_fraction: 0.0,
                outlier_scale: d_outlier_scale(),
                n_labeled: d_n_labeled(),
                n_test: d_n_test(),
                stratified: d_true(),
            },
            backbone: BackboneConfig::default(),
            augment: AugmentConfig::default(),
            scope: ScopeConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::InvalidConfig(format!("{field}: {why}")));

        match self.dataset.generator {
            GeneratorKind::GaussianMixture => {
                if self.dataset.classes < 2 {
                    return bad("dataset.classes", "must be >= 2".into());
                }
                if self.dataset.dims < 2 {
                    return bad("dataset.dims", "must be >= 2".into());
                }
                if !self.dataset.class_separation.is_finite()
                    || self.dataset.class_separation <= 0.0
                {
                    return bad("dataset.class_separation", "must be > 0".into());
                }
                if self.dataset.cov_scale < 0.0 {
                    return bad("dataset.cov_scale", "must be >= 0".into());
                }
                if self.dataset.n_per_class == 0 {
                    return bad("dataset.n_per_class", "must be >= 1".into());
                }
            }
            GeneratorKind::TwoMoons => {
                if !self.dataset.n.is_multiple_of(2) || self.dataset.n == 0 {
                    return bad("dataset.n", "must be even and positive".into());
                }
                if self.dataset.noise_sd < 0.0 {
                    return bad("dataset.noise_sd", "must be >= 0".into());
                }
            }
            GeneratorKind::Csv => {
                if self.dataset.path.is_none() {
                    return bad("dataset.path", "required when generator = \"csv\"".into());
                }
            }
        }
        if !(0.0..=0.5).contains(&self.dataset.outlier_fraction) {
            return bad("dataset.outlier_fraction", "must lie in [0, 0.5]".into());
        }
        if self.dataset.outlier_scale < 0.0 {
            return bad("dataset.outlier_scale", "must be >= 0".into());
        }
        if self.dataset.n_labeled == 0 {
            return bad("dataset.n_labeled", "must be >= 1".into());
        }

        if !self.backbone.learning_rate.is_finite() || self.backbone.learning_rate <= 0.0 {
            return bad("backbone.learning_rate", "must be finite and > 0".into());
        }
        if self.backbone.batch_size == 0 {
            return bad("backbone.batch_size", "must be >= 1".into());
        }

        if self.augment.weak_jitter_factor < 0.0 || self.augment.strong_jitter_factor < 0.0 {
            return bad("augment", "jitter factors must be >= 0".into());
        }
        if self.augment.weak_jitter_factor >= self.augment.strong_jitter_factor {
            return bad(
                "augment.weak_jitter_factor",
                "must be below strong_jitter_factor".into(),
            );
        }
        if !(0.0..1.0).contains(&self.augment.strong_dropout_fraction) {
            return bad("augment.strong_dropout_fraction", "must lie in [0, 1)".into());
        }

        if !(0.0 < self.scope.confidence_threshold && self.scope.confidence_threshold <= 1.0) {
            return bad("scope.confidence_threshold", "must lie in (0, 1]".into());
        }
        if self.scope.lambda_u < 0.0 || !self.scope.lambda_u.is_finite() {
            return bad("scope.lambda_u", "must be finite and >= 0".into());
        }
        if self.scope.filter_mode.knn_enabled() {
            if !(-1.0 < self.scope.gamma && self.scope.gamma < 1.0) {
                return bad("scope.gamma", "must lie in (-1, 1)".into());
            }
            if self.scope.k < 1 {
                return bad("scope.k", "must be >= 1".into());
            }
        }
        if self.scope.epochs_per_iteration == 0 && self.scope.em_iterations > 0 {
            return bad("scope.epochs_per_iteration", "must be >= 1".into());
        }
        Ok(())
    }
}
