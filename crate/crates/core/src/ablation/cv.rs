//! Hold-pairs-out cross-validation of the impression classifier.

use std::collections::HashSet;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, Metrics};
use super::stats::{aggregate, Aggregate};
use super::AblationCondition;
use crate::corpus::{balance_dataset, build_examples, make_folds, DialogueRecord, Fold, TrainingExample};
use crate::encoder::{encode_examples, fit_vocab, forward, render_history, train_monitored, EncoderConfig, Encoded, ModelParams, TrainConfig, Vocab};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub seed: u64,
    pub history_len: usize,
    pub initial_score: f64,
    pub target_pos: usize,
    pub target_neg: usize,
    pub max_vocab: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            history_len: crate::corpus::DEFAULT_HISTORY_LEN,
            initial_score: crate::corpus::DEFAULT_INITIAL_SCORE,
            target_pos: 280,
            target_neg: 269,
            max_vocab: 512,
        }
    }
}

/// Balanced examples, folds over their pairs, and the shared vocabulary.
#[derive(Debug, Clone)]
pub struct CvData {
    pub examples: Vec<TrainingExample>,
    pub folds: Vec<Fold>,
    pub vocab: Vocab,
}

/// Every text segment the classifier can see, for vocabulary fitting.
pub fn example_texts(examples: &[TrainingExample]) -> Vec<String> {
    examples
        .iter()
        .flat_map(|e| {
            [
                e.partner_profile.render_text(),
                e.speaker_profile.render_text(),
                e.target_text.clone(),
                render_history(&e.history),
            ]
        })
        .collect()
}

pub fn prepare_cv(corpus: &[DialogueRecord], config: &CvConfig) -> Result<CvData> {
    let all = build_examples(corpus, config.history_len, config.initial_score)?;
    let examples = balance_dataset(&all, config.target_pos, config.target_neg, config.seed)?;
    let pairs: Vec<String> = corpus.iter().map(|d| d.pair_id.clone()).collect();
    let folds = make_folds(&pairs, config.seed)?;
    let vocab = fit_vocab(&example_texts(&all), config.max_vocab)?;
    Ok(CvData { examples, folds, vocab })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub val_pair: String,
    pub test_pair: String,
    /// Test predictions of both role orientations pooled.
    pub metrics: Metrics,
    /// Selected epoch per evaluated orientation.
    pub best_epochs: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvResult {
    pub condition: AblationCondition,
    pub folds: Vec<FoldResult>,
    pub aggregate: Option<Aggregate>,
    pub warnings: Vec<String>,
    /// One checkpoint per evaluated fold, selected on the fold's validation
    /// pair; the voting ensemble.
    #[serde(skip)]
    pub models: Vec<ModelParams<f64>>,
}

impl CvResult {
    /// Per-fold values of score `k` (0 accuracy, 1 precision, 2 recall, 3 F1).
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.folds.iter().map(|f| f.metrics.scores()[k]).collect()
    }

    pub fn mean_accuracy(&self) -> Option<f64> {
        self.aggregate.as_ref().map(|a| a.accuracy.mean)
    }
}

fn by_pair<'a>(data: &'a [TrainingExample], enc: &'a [Encoded], pair: &'a str) -> impl Iterator<Item = &'a Encoded> + 'a {
    data.iter().zip(enc).filter(move |(e, _)| e.pair_id == pair).map(|(_, x)| x)
}

struct FoldRun {
    result: Option<FoldResult>,
    model: Option<ModelParams<f64>>,
    warnings: Vec<String>,
}

fn run_fold(
    index: usize,
    fold: &Fold,
    data: &CvData,
    encoded: &[Encoded],
    encoder_config: &EncoderConfig,
    train_config: &TrainConfig,
) -> Result<FoldRun> {
    let train_pairs: HashSet<&str> = fold.train_pairs.iter().map(String::as_str).collect();
    let train: Vec<Encoded> = data
        .examples
        .iter()
        .zip(encoded)
        .filter(|(e, _)| train_pairs.contains(e.pair_id.as_str()))
        .map(|(_, x)| x.clone())
        .collect();
    let mut warnings = Vec::new();

    // (val set, test set) per orientation that has examples on both sides.
    let mut orientations = Vec::new();
    for (val_pair, test_pair) in fold.orientations() {
        if train_pairs.contains(val_pair) || train_pairs.contains(test_pair) {
            return Err(Error::validation(format!("fold {index} leaks held-out pairs into training")));
        }
        let val: Vec<Encoded> = by_pair(&data.examples, encoded, val_pair).cloned().collect();
        let test: Vec<Encoded> = by_pair(&data.examples, encoded, test_pair).cloned().collect();
        if val.is_empty() || test.is_empty() {
            warnings.push(format!(
                "fold {index}: orientation val={val_pair} test={test_pair} skipped (no examples)"
            ));
            continue;
        }
        orientations.push((val, test));
    }
    if orientations.is_empty() || train.is_empty() {
        warnings.push(format!("fold {index} skipped: no evaluable test examples"));
        return Ok(FoldRun { result: None, model: None, warnings });
    }

    let encoder_config = EncoderConfig {
        seed: encoder_config.seed.wrapping_add(index as u64),
        ..encoder_config.clone()
    };
    let train_config = TrainConfig {
        seed: train_config.seed.wrapping_add(index as u64),
        ..train_config.clone()
    };
    let monitors: Vec<&[Encoded]> = orientations.iter().map(|(v, _)| v.as_slice()).collect();
    let outcomes = train_monitored::<f64>(&train, &monitors, &encoder_config, &train_config)?;

    let (mut preds, mut labels) = (Vec::new(), Vec::new());
    for ((_, test), outcome) in orientations.iter().zip(&outcomes) {
        for ex in test {
            let p = forward(&outcome.params, &ex.tokens)?.prob;
            preds.push(p >= encoder_config.threshold);
            labels.push(ex.label);
        }
    }
    let best_epochs = outcomes.iter().map(|o| o.best_epoch).collect();
    let model = outcomes.into_iter().next().map(|o| o.params);
    Ok(FoldRun {
        result: Some(FoldResult {
            fold: index,
            val_pair: fold.val_pair.clone(),
            test_pair: fold.test_pair.clone(),
            metrics: compute_metrics(&preds, &labels)?,
            best_epochs,
        }),
        model,
        warnings,
    })
}

/// Trains and evaluates one model per fold under `condition`. Folds run in
/// parallel; results are merged in fold order.
pub fn run_cv(
    data: &CvData,
    condition: AblationCondition,
    encoder_config: &EncoderConfig,
    train_config: &TrainConfig,
) -> Result<CvResult> {
    let encoder_config = EncoderConfig {
        vocab_size: data.vocab.len(),
        ..encoder_config.clone()
    };
    encoder_config.validate()?;
    train_config.validate()?;
    let encoded = encode_examples(&data.examples, condition, &data.vocab, encoder_config.max_len)?;

    let runs: Vec<Result<FoldRun>> = data
        .folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| run_fold(i, fold, data, &encoded, &encoder_config, train_config))
        .collect();

    let mut result = CvResult {
        condition,
        folds: Vec::new(),
        aggregate: None,
        warnings: Vec::new(),
        models: Vec::new(),
    };
    for run in runs {
        let run = run?;
        for w in &run.warnings {
            warn!("{condition}: {w}");
        }
        result.warnings.extend(run.warnings);
        if let (Some(r), Some(m)) = (run.result, run.model) {
            result.folds.push(r);
            result.models.push(m);
        }
    }
    if result.folds.len() >= 2 {
        let per_fold: Vec<Metrics> = result.folds.iter().map(|f| f.metrics.clone()).collect();
        result.aggregate = Some(aggregate(&per_fold)?);
    }
    Ok(result)
}
