//! Fold aggregation and paired significance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::metrics::Metrics;
use crate::error::{Error, Result};

/// Largest fold count for which sign flips are enumerated exhaustively.
pub const EXACT_PERMUTATION_MAX: usize = 12;
pub const PERMUTATION_RESAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample (n - 1) standard deviation.
    pub std: f64,
}

pub fn mean_std(xs: &[f64]) -> Result<MeanStd> {
    if xs.len() < 2 {
        return Err(Error::validation("mean ± std needs at least two folds"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MeanStd { mean, std: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub folds: usize,
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
}

impl Aggregate {
    pub fn metrics(&self) -> [MeanStd; 4] {
        [self.accuracy, self.precision, self.recall, self.f1]
    }
}

pub fn aggregate(per_fold: &[Metrics]) -> Result<Aggregate> {
    let col = |f: fn(&Metrics) -> f64| -> Result<MeanStd> {
        mean_std(&per_fold.iter().map(f).collect::<Vec<_>>())
    };
    Ok(Aggregate {
        folds: per_fold.len(),
        accuracy: col(|m| m.accuracy)?,
        precision: col(|m| m.precision)?,
        recall: col(|m| m.recall)?,
        f1: col(|m| m.f1)?,
    })
}

/// Two-sided paired permutation test on fold-wise differences: the share of
/// sign assignments whose summed difference is at least as extreme as the
/// observed one. Exhaustive up to [`EXACT_PERMUTATION_MAX`] folds, otherwise
/// `resamples` seeded random sign vectors with the add-one correction.
pub fn paired_permutation_p(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<(f64, bool)> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::validation("paired test needs equal fold counts >= 2"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok((1.0, true));
    }
    let observed = diffs.iter().sum::<f64>().abs();
    let tol = 1e-12 * diffs.iter().map(|d| d.abs()).sum::<f64>();
    let n = diffs.len();
    if n <= EXACT_PERMUTATION_MAX {
        let total = 1usize << n;
        let extreme = (0..total)
            .filter(|mask| {
                let s: f64 = diffs
                    .iter()
                    .enumerate()
                    .map(|(i, d)| if mask >> i & 1 == 1 { -d } else { *d })
                    .sum();
                s.abs() >= observed - tol
            })
            .count();
        return Ok((extreme as f64 / total as f64, true));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..resamples {
        let s: f64 = diffs
            .iter()
            .map(|d| if rng.random::<bool>() { -d } else { *d })
            .sum();
        if s.abs() >= observed - tol {
            extreme += 1;
        }
    }
    Ok(((extreme + 1) as f64 / (resamples + 1) as f64, false))
}

/// Welch's unequal-variance t-test: `(t, df, two-sided p)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    let (sa, sb) = (mean_std(a)?, mean_std(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sa.std.powi(2) / na, sb.std.powi(2) / nb);
    let diff = sa.mean - sb.mean;
    if va + vb == 0.0 {
        let p = if diff == 0.0 { 1.0 } else { 0.0 };
        let t = if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY };
        return Ok((t, na + nb - 2.0, p));
    }
    let t = diff / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va.powi(2) / (na - 1.0) + vb.powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::validation(format!("Welch t distribution: {e}")))?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok((t, df, p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub permutation_p: f64,
    pub exact: bool,
    pub welch_t: f64,
    pub welch_df: f64,
    pub welch_p: f64,
}

/// Paired permutation p-value (primary) plus Welch's t-test for reference.
pub fn significance(metric_a: &[f64], metric_b: &[f64], seed: u64) -> Result<Significance> {
    let (permutation_p, exact) =
        paired_permutation_p(metric_a, metric_b, PERMUTATION_RESAMPLES, seed)?;
    let (welch_t, welch_df, welch_p) = welch_t_test(metric_a, metric_b)?;
    Ok(Significance { permutation_p, exact, welch_t, welch_df, welch_p })
}
