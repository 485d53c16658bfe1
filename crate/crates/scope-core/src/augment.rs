//! Weak and strong stochastic augmentation for vector data.
//!
//! The image-world weak/strong asymmetry is realized here with Gaussian jitter
//! (weak) and larger jitter plus coordinate dropout (strong): predictions on
//! the weak branch supervise the strong branch. Both functions are
//! deterministic given `(x, params, draw)` — the draw seeds a private RNG, so
//! the same sample augments identically no matter when it is visited.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_AUGMENT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub weak_jitter_sd: f64,
    pub strong_jitter_sd: f64,
    /// Fraction of coordinates zeroed by the strong branch; the zeroed count
    /// is floor(fraction * D).
    pub strong_dropout_fraction: f64,
    /// Seed stream that augmentation draws run on.
    pub seed_stream: u64,
}

impl AugmentParams {
    /// Default strengths scaled to a dataset's feature spread: 0.02 sd weak
    /// jitter, 0.15 sd strong jitter, 25% coordinate dropout.
    pub fn from_feature_sd(feature_sd: f64) -> Self {
        AugmentParams {
            weak_jitter_sd: 0.02 * feature_sd,
            strong_jitter_sd: 0.15 * feature_sd,
            strong_dropout_fraction: 0.25,
            seed_stream: STREAM_AUGMENT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weak_jitter_sd < 0.0 || self.strong_jitter_sd < 0.0 {
            return Err(Error::InvalidInput("jitter sd must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.strong_dropout_fraction) {
            return Err(Error::InvalidInput(
                "strong_dropout_fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// x + Normal(0, weak_jitter_sd^2 I).
pub fn weak(x: &[f64], params: &AugmentParams, draw: u64) -> Vec<f64> {
    let mut rng = stream_rng(draw, params.seed_stream);
    x.iter()
        .map(|v| {
            let z: f64 = rng.sample(StandardNormal);
            v + params.weak_jitter_sd * z
        })
        .collect()
}

/// Jitter at strong_jitter_sd, then zero floor(dropout * D) random coordinates.
pub fn strong(x: &[f64], params: &AugmentParams, draw: u64) -> Vec<f64> {
    let mut rng = stream_rng(draw, params.seed_stream);
    let mut out: Vec<f64> = x
        .iter()
        .map(|v| {
            let z: f64 = rng.sample(StandardNormal);
            v + params.strong_jitter_sd * z
        })
        .collect();
    let n_drop = (params.strong_dropout_fraction * x.len() as f64).floor() as usize;
    if n_drop > 0 {
        let mut coords: Vec<usize> = (0..x.len()).collect();
        coords.shuffle(&mut rng);
        for &j in &coords[..n_drop] {
            out[j] = 0.0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(weak_sd: f64, strong_sd: f64, drop: f64) -> AugmentParams {
        AugmentParams {
            weak_jitter_sd: weak_sd,
            strong_jitter_sd: strong_sd,
            strong_dropout_fraction: drop,
            seed_stream: STREAM_AUGMENT,
        }
    }

    #[test]
    fn zero_strength_is_identity() {
        let x = vec![1.0, -2.0, 0.5];
        assert_eq!(weak(&x, &params(0.0, 0.1, 0.25), 7), x);
        assert_eq!(strong(&x, &params(0.0, 0.0, 0.0), 7), x);
    }

    #[test]
    fn same_draw_reproduces() {
        let x = vec![0.3, 0.7, -1.1, 2.0];
        let p = params(0.05, 0.2, 0.25);
        assert_eq!(weak(&x, &p, 42), weak(&x, &p, 42));
        assert_eq!(strong(&x, &p, 42), strong(&x, &p, 42));
        assert_ne!(weak(&x, &p, 42), weak(&x, &p, 43));
    }

    #[test]
    fn strong_zeroes_floor_fraction_of_coordinates() {
        // Jitter off so zeroed coordinates are unambiguous on nonzero input.
        let x = vec![1.0; 8];
        let p = params(0.0, 0.0, 0.25);
        let out = strong(&x, &p, 5);
        let zeroed = out.iter().filter(|v| **v == 0.0).count();
        assert_eq!(zeroed, 2);
    }

    #[test]
    fn weak_jitter_matches_nominal_sd() {
        // Monte-Carlo: per-coordinate sample sd within 5% of the nominal.
        let x = vec![0.0, 1.0];
        let p = params(0.1, 0.3, 0.25);
        let n = 10_000;
        let mut sums = [0.0; 2];
        let mut sq = [0.0; 2];
        for draw in 0..n {
            let y = weak(&x, &p, draw);
            for j in 0..2 {
                let d = y[j] - x[j];
                sums[j] += d;
                sq[j] += d * d;
            }
        }
        for j in 0..2 {
            let mean = sums[j] / n as f64;
            let var = sq[j] / n as f64 - mean * mean;
            let sd = var.sqrt();
            assert!(
                (sd - 0.1).abs() / 0.1 < 0.05,
                "coordinate {j}: sample sd {sd}"
            );
        }
    }

    #[test]
    fn strong_displaces_more_than_weak() {
        let x = vec![0.8, -0.4, 1.5, 0.2, -2.0, 0.9];
        let p = AugmentParams::from_feature_sd(1.0);
        let n = 1000;
        let mean_sq = |f: &dyn Fn(u64) -> Vec<f64>| {
            (0..n)
                .map(|draw| {
                    f(draw)
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .sum::<f64>()
                / n as f64
        };
        let weak_ms = mean_sq(&|d| weak(&x, &p, d));
        let strong_ms = mean_sq(&|d| strong(&x, &p, d));
        assert!(
            strong_ms > weak_ms,
            "strong {strong_ms} should exceed weak {weak_ms}"
        );
    }

    #[test]
    fn defaults_keep_weak_below_strong() {
        let p = AugmentParams::from_feature_sd(2.5);
        assert!(p.weak_jitter_sd < p.strong_jitter_sd);
        p.validate().unwrap();
        assert!(params(0.1, 0.1, 1.0).validate().is_err());
    }
}
