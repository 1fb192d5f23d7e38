use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary classification scores with their confusion counts. A ratio whose
/// denominator is zero is reported as 0 with its `*_undefined` flag set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Result<Self> {
        let total = tp + fp + fn_ + tn;
        if total == 0 {
            return Err(Error::validation("metrics over zero predictions"));
        }
        let (precision, precision_undefined) = ratio(tp, tp + fp);
        let (recall, recall_undefined) = ratio(tp, tp + fn_);
        // Harmonic mean of precision and recall, in count form.
        let (f1, f1_undefined) = ratio(2 * tp, 2 * tp + fp + fn_);
        Ok(Self {
            tp,
            fp,
            fn_,
            tn,
            accuracy: (tp + tn) as f64 / total as f64,
            precision,
            recall,
            f1,
            precision_undefined,
            recall_undefined,
            f1_undefined,
        })
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The four headline scores in table order.
    pub fn scores(&self) -> [f64; 4] {
        [self.accuracy, self.precision, self.recall, self.f1]
    }
}

pub fn compute_metrics(predictions: &[bool], labels: &[bool]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Metrics::from_counts(tp, fp, fn_, tn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let mut pred = vec![true, true, true, false];
        let mut gold = vec![true, true, false, true];
        pred.extend([false; 6]);
        gold.extend([false; 6]);
        let m = compute_metrics(&pred, &gold).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (2, 1, 1, 6));
        assert!((m.accuracy - 0.8).abs() < 1e-15);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_classifier() {
        let gold = [true, false, true, false];
        assert_eq!(compute_metrics(&gold, &gold).unwrap().scores(), [1.0; 4]);
    }

    #[test]
    fn undefined_ratios_are_flagged() {
        let m = compute_metrics(&[false, false], &[false, false]).unwrap();
        assert_eq!(m.scores(), [1.0, 0.0, 0.0, 0.0]);
        assert!(m.precision_undefined && m.recall_undefined && m.f1_undefined);
        let m = compute_metrics(&[false, false], &[true, false]).unwrap();
        assert!(m.precision_undefined && !m.recall_undefined && !m.f1_undefined);
    }

    #[test]
    fn length_mismatch() {
        assert!(compute_metrics(&[true], &[true, false]).is_err());
        assert!(compute_metrics(&[], &[]).is_err());
    }
}
