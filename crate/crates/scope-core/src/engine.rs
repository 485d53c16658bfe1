//! The pseudolabeling meta-loop.
//!
//! One iteration, starting from parameters `theta_t`:
//!
//! 1. predict every unlabeled sample on a weakly augmented view; keep
//!    predictions whose confidence reaches the threshold (expectation step);
//! 2. run the enabled filters over those candidates;
//! 3. train for a fixed number of epochs on supervised loss plus
//!    `lambda_u` times the filter-masked unsupervised loss, where the
//!    unsupervised targets are the frozen pseudolabels and the inputs are
//!    strongly augmented views (maximization step);
//! 4. promote candidates that passed every enabled filter into the labeled
//!    pool, with their pseudolabel as the visible label;
//! 5. log confounding: promoted-but-wrong counts over the pool size at the
//!    iteration start.
//!
//! Promotions are permanent by default; `repseudolabel` demotes them again at
//! the start of each iteration for ablations. The `oracle_filter` harness mode
//! additionally drops incorrect pseudolabels before training and promotion,
//! which is the counterfactual run confounding is measured against.
//!
//! Every function is deterministic given `(config, seed)`; `em_iteration`
//! consumes state by reference and returns the next state, so a caller always
//! holds the last good state if an iteration aborts.

use serde::{Deserialize, Serialize};

use crate::augment::{self, AugmentParams};
use crate::backbone::{
    add_gradients, argmax, forward, loss_and_grad, one_hot, scale_gradients, sgd_step, Gradients,
    ModelParams,
};
use crate::config::{GeneratorKind, Manifold, RunConfig};
use crate::datasets::{self, Dataset, Sample, SplitSpec};
use crate::error::{Error, Result};
use crate::filters;
use crate::linalg::Matrix;
use crate::metrics::{self, FinalMetrics, IterationRow, RunReport};
use crate::rng::{derive_seed, stream_rng, STREAM_SHUFFLE};

use rand::seq::SliceRandom;

// Draw-derivation tags; they keep warm-up, pseudolabeling and the two
// training branches on disjoint seed material.
const TAG_WARMUP: u64 = 100;
const TAG_PSEUDOLABEL: u64 = 101;
const TAG_TRAIN_WEAK: u64 = 102;
const TAG_TRAIN_STRONG: u64 = 103;

/// One pseudolabel candidate: a thresholded prediction on an unlabeled sample
/// plus every verdict that decides its fate. `correct` compares against the
/// hidden truth and feeds instrumentation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelRecord {
    /// Position in the unlabeled pool at the iteration this record was made.
    pub index: usize,
    pub pseudo_class: usize,
    pub confidence: f64,
    pub gauss_accept: bool,
    pub gauss_score: f64,
    pub knn_accept: bool,
    pub knn_count: usize,
    pub promoted: bool,
    pub correct: bool,
}

/// A labeled training example. For promoted samples `label` is the
/// pseudolabel and may disagree with `hidden_truth`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub features: Vec<f64>,
    pub label: usize,
    pub hidden_truth: usize,
    pub is_original: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledExample {
    pub features: Vec<f64>,
    pub hidden_truth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfoundingEntry {
    pub n_promoted: usize,
    pub n_promoted_incorrect: usize,
    /// n_promoted_incorrect / max(1, unlabeled pool size at iteration start).
    pub confounding_error_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EMState {
    pub labeled: Vec<TrainExample>,
    pub unlabeled: Vec<UnlabeledExample>,
    pub params: ModelParams,
    /// Completed EM iterations.
    pub em_iteration: usize,
    pub confounding_log: Vec<ConfoundingEntry>,
}

/// Everything `run` produces: the report plus the raw per-iteration records
/// the report numbers are derived from, and the final model.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub records_per_iteration: Vec<Vec<PseudoLabelRecord>>,
    pub final_params: ModelParams,
}

fn batch_from<'a, I: Iterator<Item = &'a [f64]>>(rows: I) -> Result<Matrix> {
    let collected: Vec<&[f64]> = rows.collect();
    Matrix::from_rows(&collected)
}

/// Expectation step: predict each unlabeled sample on a weak augmentation and
/// keep predictions with confidence at or above the threshold. Filter flags
/// start out accepting; [`em_iteration`] fills them in.
pub fn pseudolabel(
    params: &ModelParams,
    unlabeled: &[UnlabeledExample],
    aug: &AugmentParams,
    confidence_threshold: f64,
    draw: u64,
) -> Result<Vec<PseudoLabelRecord>> {
    let (records, _, _) = pseudolabel_full(params, unlabeled, aug, confidence_threshold, draw)?;
    Ok(records)
}

/// As [`pseudolabel`], but also returns the probability and penultimate rows
/// of the record-bearing samples (in record order) for the filters.
pub fn pseudolabel_full(
    params: &ModelParams,
    unlabeled: &[UnlabeledExample],
    aug: &AugmentParams,
    confidence_threshold: f64,
    draw: u64,
) -> Result<(Vec<PseudoLabelRecord>, Matrix, Matrix)> {
    let classes = params.n_classes();
    let floor = 1.0 / classes as f64;
    if !(confidence_threshold > floor && confidence_threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence threshold {confidence_threshold} outside (1/{classes}, 1]"
        )));
    }
    if unlabeled.is_empty() {
        return Ok((
            Vec::new(),
            Matrix::zeros(0, classes),
            Matrix::zeros(0, 0),
        ));
    }
    let augmented: Vec<Vec<f64>> = unlabeled
        .iter()
        .enumerate()
        .map(|(i, s)| augment::weak(&s.features, aug, derive_seed(draw, &[i as u64])))
        .collect();
    let batch = batch_from(augmented.iter().map(|v| v.as_slice()))?;
    let fwd = forward(params, &batch)?;

    let mut records = Vec::new();
    let mut prob_rows: Vec<&[f64]> = Vec::new();
    let mut penult_rows: Vec<&[f64]> = Vec::new();
    for (i, sample) in unlabeled.iter().enumerate() {
        let probs = fwd.probabilities.row(i);
        let pseudo_class = argmax(probs);
        let confidence = probs[pseudo_class];
        if confidence >= confidence_threshold {
            records.push(PseudoLabelRecord {
                index: i,
                pseudo_class,
                confidence,
                gauss_accept: true,
                gauss_score: 0.0,
                knn_accept: true,
                knn_count: 0,
                promoted: false,
                correct: pseudo_class == sample.hidden_truth,
            });
            prob_rows.push(probs);
            penult_rows.push(fwd.penultimate.row(i));
        }
    }
    let probs = Matrix::from_rows(&prob_rows)?;
    let penult = Matrix::from_rows(&penult_rows)?;
    Ok((records, probs, penult))
}

/// Masked unsupervised loss: cross-entropy of strongly augmented inputs
/// against the frozen pseudolabels, with per-sample weight 1 when every
/// enabled filter accepted and 0 otherwise. A fully masked batch contributes
/// nothing (zero loss, zero gradients) rather than erroring.
///
/// Strong-augmentation draws are keyed by each record's pool index, so the
/// result over a subset of records equals the result over the full set with
/// the complement masked out.
pub fn unsupervised_loss_batch(
    params: &ModelParams,
    records: &[PseudoLabelRecord],
    unlabeled: &[UnlabeledExample],
    aug: &AugmentParams,
    draw: u64,
) -> Result<(f64, Gradients)> {
    if records.is_empty() {
        return Err(Error::InvalidInput(
            "unsupervised_loss_batch needs at least one record".into(),
        ));
    }
    let weights: Vec<f64> = records
        .iter()
        .map(|r| f64::from(u8::from(r.gauss_accept && r.knn_accept)))
        .collect();
    if weights.iter().all(|&w| w == 0.0) {
        return Ok((0.0, params.zeros_like()));
    }
    let augmented: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            augment::strong(
                &unlabeled[r.index].features,
                aug,
                derive_seed(draw, &[r.index as u64]),
            )
        })
        .collect();
    let batch = batch_from(augmented.iter().map(|v| v.as_slice()))?;
    let classes: Vec<usize> = records.iter().map(|r| r.pseudo_class).collect();
    let targets = one_hot(&classes, params.n_classes());
    loss_and_grad(params, &batch, &targets, &weights)
}

fn filter_verdicts(
    records: &mut [PseudoLabelRecord],
    probs: &Matrix,
    penult: &Matrix,
    labeled: &[TrainExample],
    params: &ModelParams,
    config: &RunConfig,
) -> Result<()> {
    if records.is_empty() {
        return Ok(());
    }
    let pseudo_classes: Vec<usize> = records.iter().map(|r| r.pseudo_class).collect();

    if config.scope.filter_mode.gaussian_enabled() {
        let verdicts =
            filters::gaussian_filter(probs, &pseudo_classes, config.scope.refinement_rounds)?;
        for (r, v) in records.iter_mut().zip(&verdicts) {
            r.gauss_accept = v.accepted;
            r.gauss_score = v.score;
        }
    }

    if config.scope.filter_mode.knn_enabled() {
        let labeled_batch = batch_from(labeled.iter().map(|s| s.features.as_slice()))?;
        let labeled_fwd = forward(params, &labeled_batch)?;
        let labeled_classes: Vec<usize> = labeled.iter().map(|s| s.label).collect();
        let (labeled_emb, unlabeled_emb) = match config.scope.manifold {
            Manifold::Penultimate => (&labeled_fwd.penultimate, penult),
            Manifold::Probabilities => (&labeled_fwd.probabilities, probs),
        };
        let verdicts = filters::knn_filter(
            labeled_emb,
            &labeled_classes,
            unlabeled_emb,
            &pseudo_classes,
            config.scope.gamma,
            config.scope.k,
        )?;
        for (r, v) in records.iter_mut().zip(&verdicts) {
            r.knn_accept = v.accepted;
            r.knn_count = v.score as usize;
        }
    }
    Ok(())
}

/// One epoch of interleaved minibatch SGD. Supervised batches are weakly
/// augmented labeled samples; when unsupervised records are present their
/// gradient (already masked) is added with weight `lambda_u`.
#[allow(clippy::too_many_arguments)]
fn train_epoch(
    params: ModelParams,
    labeled: &[TrainExample],
    records: &[PseudoLabelRecord],
    unlabeled: &[UnlabeledExample],
    aug: &AugmentParams,
    config: &RunConfig,
    tag: u64,
    t: u64,
    epoch: u64,
) -> Result<ModelParams> {
    let classes = params.n_classes();
    let bs = config.backbone.batch_size;
    let lr = config.backbone.learning_rate;
    let lambda_u = config.scope.lambda_u;

    let mut labeled_order: Vec<usize> = (0..labeled.len()).collect();
    let mut shuffle_rng = stream_rng(derive_seed(config.seed, &[tag, t, epoch, 1]), STREAM_SHUFFLE);
    labeled_order.shuffle(&mut shuffle_rng);

    // Records whose mask is zero contribute nothing; skip them up front.
    let active: Vec<&PseudoLabelRecord> = records
        .iter()
        .filter(|r| r.gauss_accept && r.knn_accept)
        .collect();
    let mut record_order: Vec<usize> = (0..active.len()).collect();
    let mut rec_rng = stream_rng(derive_seed(config.seed, &[tag, t, epoch, 2]), STREAM_SHUFFLE);
    record_order.shuffle(&mut rec_rng);

    let n_sup_batches = labeled.len().div_ceil(bs);
    let n_unsup_batches = active.len().div_ceil(bs);
    let steps = n_sup_batches.max(n_unsup_batches).max(1);

    let strong_draw = derive_seed(config.seed, &[TAG_TRAIN_STRONG, t, epoch]);

    let mut params = params;
    for step in 0..steps {
        // Supervised branch (1:1 interleave, cycling the shorter side).
        let sup_chunk: Vec<usize> = {
            let b = step % n_sup_batches;
            labeled_order[b * bs..((b + 1) * bs).min(labeled.len())].to_vec()
        };
        let sup_inputs: Vec<Vec<f64>> = sup_chunk
            .iter()
            .map(|&i| {
                let draw = derive_seed(config.seed, &[TAG_TRAIN_WEAK, t, epoch, i as u64]);
                augment::weak(&labeled[i].features, aug, draw)
            })
            .collect();
        let sup_batch = batch_from(sup_inputs.iter().map(|v| v.as_slice()))?;
        let sup_labels: Vec<usize> = sup_chunk.iter().map(|&i| labeled[i].label).collect();
        let sup_targets = one_hot(&sup_labels, classes);
        let weights = vec![1.0; sup_chunk.len()];
        let (sup_loss, mut grads) = loss_and_grad(&params, &sup_batch, &sup_targets, &weights)?;
        let mut total_loss = sup_loss;

        if n_unsup_batches > 0 && lambda_u > 0.0 {
            let b = step % n_unsup_batches;
            let chunk: Vec<PseudoLabelRecord> = record_order
                [b * bs..((b + 1) * bs).min(active.len())]
                .iter()
                .map(|&i| active[i].clone())
                .collect();
            let (unsup_loss, mut unsup_grads) =
                unsupervised_loss_batch(&params, &chunk, unlabeled, aug, strong_draw)?;
            scale_gradients(&mut unsup_grads, lambda_u);
            add_gradients(&mut grads, &unsup_grads);
            total_loss += lambda_u * unsup_loss;
        }

        if !total_loss.is_finite() {
            return Err(Error::TrainingDiverged("loss"));
        }
        params = sgd_step(&params, &grads, lr)?;
    }
    Ok(params)
}

/// Supervised warm-up on the labeled pool.
pub fn train_warmup(
    params: ModelParams,
    labeled: &[TrainExample],
    aug: &AugmentParams,
    config: &RunConfig,
) -> Result<ModelParams> {
    let mut params = params;
    for epoch in 0..config.backbone.warmup_epochs {
        params = train_epoch(
            params,
            labeled,
            &[],
            &[],
            aug,
            config,
            TAG_WARMUP,
            0,
            epoch as u64,
        )?;
    }
    Ok(params)
}

/// One full EM iteration. Returns the next state and the iteration's records.
pub fn em_iteration(
    state: &EMState,
    config: &RunConfig,
    aug: &AugmentParams,
) -> Result<(EMState, Vec<PseudoLabelRecord>)> {
    if state.labeled.is_empty() {
        return Err(Error::InvalidInput("labeled pool is empty".into()));
    }
    let t = state.em_iteration as u64;
    let mut labeled = state.labeled.clone();
    let mut unlabeled = state.unlabeled.clone();

    if config.scope.repseudolabel {
        // Promotions are provisional: demote everything non-original.
        let mut kept = Vec::with_capacity(labeled.len());
        for ex in labeled.drain(..) {
            if ex.is_original {
                kept.push(ex);
            } else {
                unlabeled.push(UnlabeledExample {
                    features: ex.features,
                    hidden_truth: ex.hidden_truth,
                });
            }
        }
        labeled = kept;
    }
    let pool_at_start = unlabeled.len();

    // (1) Expectation: pseudolabel the pool with theta_t.
    let draw = derive_seed(config.seed, &[TAG_PSEUDOLABEL, t]);
    let (mut records, probs, penult) = pseudolabel_full(
        &state.params,
        &unlabeled,
        aug,
        config.scope.confidence_threshold,
        draw,
    )?;

    // (2) Filter verdicts with theta_t.
    filter_verdicts(&mut records, &probs, &penult, &labeled, &state.params, config)?;

    // (3) Maximization: combined-loss SGD with frozen pseudolabels.
    let train_records: Vec<PseudoLabelRecord> = if config.scope.oracle_filter {
        records.iter().filter(|r| r.correct).cloned().collect()
    } else {
        records.clone()
    };
    let mut params = state.params.clone();
    for epoch in 0..config.scope.epochs_per_iteration {
        params = train_epoch(
            params,
            &labeled,
            &train_records,
            &unlabeled,
            aug,
            config,
            TAG_PSEUDOLABEL,
            t,
            epoch as u64,
        )?;
    }

    // (4) Promotion.
    let mut promote = vec![false; unlabeled.len()];
    for r in records.iter_mut() {
        let passes = r.gauss_accept && r.knn_accept && (!config.scope.oracle_filter || r.correct);
        r.promoted = passes;
        if passes {
            promote[r.index] = true;
        }
    }
    let mut n_promoted = 0usize;
    let mut n_promoted_incorrect = 0usize;
    for r in records.iter().filter(|r| r.promoted) {
        n_promoted += 1;
        if !r.correct {
            n_promoted_incorrect += 1;
        }
        let sample = &unlabeled[r.index];
        labeled.push(TrainExample {
            features: sample.features.clone(),
            label: r.pseudo_class,
            hidden_truth: sample.hidden_truth,
            is_original: false,
        });
    }
    let unlabeled: Vec<UnlabeledExample> = unlabeled
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !promote[*i])
        .map(|(_, s)| s)
        .collect();

    // (5) Confounding bookkeeping.
    let mut confounding_log = state.confounding_log.clone();
    confounding_log.push(ConfoundingEntry {
        n_promoted,
        n_promoted_incorrect,
        confounding_error_rate: n_promoted_incorrect as f64 / pool_at_start.max(1) as f64,
    });

    Ok((
        EMState {
            labeled,
            unlabeled,
            params,
            em_iteration: state.em_iteration + 1,
            confounding_log,
        },
        records,
    ))
}

/// Argmax predictions on raw (un-augmented) features.
pub fn predict(params: &ModelParams, features: &[Vec<f64>]) -> Result<Vec<usize>> {
    if features.is_empty() {
        return Ok(Vec::new());
    }
    let batch = batch_from(features.iter().map(|v| v.as_slice()))?;
    let fwd = forward(params, &batch)?;
    Ok(fwd.probabilities.iter_rows().map(argmax).collect())
}

fn test_accuracy(params: &ModelParams, test: &[Sample]) -> Result<f64> {
    let features: Vec<Vec<f64>> = test.iter().map(|s| s.features.clone()).collect();
    let preds = predict(params, &features)?;
    let truth: Vec<usize> = test.iter().map(|s| s.hidden_truth).collect();
    metrics::accuracy(&preds, &truth)
}

/// Builds the dataset named by the config and splits it. Outliers are
/// injected into the unlabeled pool only, so labeled supervision and test
/// evaluation stay clean.
pub fn prepare_data(config: &RunConfig) -> Result<(Dataset, Dataset, Dataset)> {
    let ds = &config.dataset;
    let full = match ds.generator {
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
            let path = ds
                .path
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("dataset.path: required".into()))?;
            datasets::load_csv(std::path::Path::new(path))?
        }
    };
    let spec = SplitSpec {
        n_labeled: ds.n_labeled,
        n_test: ds.n_test,
        seed: config.seed,
        stratified: ds.stratified,
    };
    let (labeled, unlabeled, test) = datasets::split(&full, &spec)?;
    let unlabeled = if ds.outlier_fraction > 0.0 && !unlabeled.is_empty() {
        datasets::inject_outliers(&unlabeled, ds.outlier_fraction, ds.outlier_scale, config.seed)?
    } else {
        unlabeled
    };
    Ok((labeled, unlabeled, test))
}

/// End-to-end run: data, warm-up, EM iterations, report.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let started = std::time::Instant::now();

    let (labeled_ds, unlabeled_ds, test_ds) = prepare_data(config)?;
    let classes = labeled_ds.n_classes;
    let threshold_floor = 1.0 / classes as f64;
    if config.scope.confidence_threshold <= threshold_floor {
        return Err(Error::InvalidConfig(format!(
            "scope.confidence_threshold: must exceed 1/{classes}"
        )));
    }

    // Augment strengths scale with the pooled spread of all split parts.
    let sd = {
        let mut all = labeled_ds.samples.clone();
        all.extend(unlabeled_ds.samples.iter().cloned());
        all.extend(test_ds.samples.iter().cloned());
        datasets::feature_sd(&Dataset::new(all, classes, labeled_ds.dim)?)
    };
    let aug = AugmentParams {
        weak_jitter_sd: config.augment.weak_jitter_factor * sd,
        strong_jitter_sd: config.augment.strong_jitter_factor * sd,
        strong_dropout_fraction: config.augment.strong_dropout_fraction,
        seed_stream: crate::rng::STREAM_AUGMENT,
    };
    aug.validate()?;

    let labeled: Vec<TrainExample> = labeled_ds
        .samples
        .iter()
        .map(|s| TrainExample {
            features: s.features.clone(),
            label: s.visible_label.expect("labeled pool sample without label"),
            hidden_truth: s.hidden_truth,
            is_original: true,
        })
        .collect();
    let unlabeled: Vec<UnlabeledExample> = unlabeled_ds
        .samples
        .iter()
        .map(|s| UnlabeledExample {
            features: s.features.clone(),
            hidden_truth: s.hidden_truth,
        })
        .collect();

    let params = ModelParams::init(
        labeled_ds.dim,
        &config.backbone.hidden,
        classes,
        config.seed,
    );
    let params = train_warmup(params, &labeled, &aug, config).map_err(|e| match e {
        Error::TrainingDiverged(what) => Error::RunAborted {
            iteration: 0,
            reason: format!("non-finite value in {what} during warm-up"),
        },
        other => other,
    })?;

    let mut iterations = vec![IterationRow {
        t: 0,
        accuracy: test_accuracy(&params, &test_ds.samples)?,
        confounding_rate: 0.0,
        n_promoted: 0,
    }];

    let mut state = EMState {
        labeled,
        unlabeled,
        params,
        em_iteration: 0,
        confounding_log: Vec::new(),
    };
    let mut records_per_iteration = Vec::new();

    for i in 0..config.scope.em_iterations {
        let (next, records) = em_iteration(&state, config, &aug).map_err(|e| match e {
            Error::TrainingDiverged(what) => Error::RunAborted {
                iteration: i + 1,
                reason: format!("non-finite value in {what}"),
            },
            other => other,
        })?;
        state = next;
        let entry = *state.confounding_log.last().expect("confounding entry");
        iterations.push(IterationRow {
            t: i + 1,
            accuracy: test_accuracy(&state.params, &test_ds.samples)?,
            confounding_rate: entry.confounding_error_rate,
            n_promoted: entry.n_promoted,
        });
        records_per_iteration.push(records);
    }

    let final_accuracy = iterations.last().expect("at least warm-up row").accuracy;
    let (lo, hi) = metrics::binomial_interval(final_accuracy, test_ds.len().max(1), 1.96)?;
    let report = RunReport {
        config: config.clone(),
        iterations,
        final_metrics: FinalMetrics {
            accuracy: final_accuracy,
            ci: [lo, hi],
        },
        seed: config.seed,
        runtime_s: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome {
        report,
        records_per_iteration,
        final_params: state.params,
    })
}

/// Record rows in the export layout:
/// `index,pseudo_class,confidence,gauss_score,gauss_accept,knn_count,knn_accept,is_correct`.
pub fn records_csv(records: &[PseudoLabelRecord]) -> String {
    let mut out = String::from(
        "index,pseudo_class,confidence,gauss_score,gauss_accept,knn_count,knn_accept,is_correct\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.index,
            r.pseudo_class,
            r.confidence,
            r.gauss_score,
            u8::from(r.gauss_accept),
            r.knn_count,
            u8::from(r.knn_accept),
            u8::from(r.correct),
        ));
    }
    out
}
