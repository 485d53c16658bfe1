//! Desk-scale semi-supervised learning with outlier-suppressed pseudolabeling.
//!
//! The toolkit trains a small feed-forward softmax classifier from a handful of
//! labeled samples plus a larger unlabeled pool. Training alternates between an
//! expectation step (pseudolabel the unlabeled pool from weakly augmented
//! inputs, keep predictions above a confidence threshold) and a maximization
//! step (gradient descent on a supervised loss plus a masked unsupervised
//! consistency loss on strongly augmented inputs). Two binary filters decide
//! which pseudolabels contribute to the unsupervised loss and which samples get
//! promoted into the labeled pool:
//!
//! - a per-class Gaussian density filter over the output probability vectors,
//! - a contrastive k-nearest-neighbor filter over backbone embeddings, using
//!   cosine similarity against same-class labeled samples.
//!
//! Every promoted-but-wrong pseudolabel is counted as a confounding error, so
//! the damage done by outliers (and the damage avoided by filtering) is
//! measurable exactly. All randomness flows through named seed streams; a run
//! is a pure function of its config.

pub mod augment;
pub mod backbone;
pub mod config;
pub mod datasets;
pub mod engine;
pub mod error;
pub mod filters;
pub mod linalg;
pub mod metrics;
pub mod rng;

pub use config::RunConfig;
pub use error::{Error, Result};
