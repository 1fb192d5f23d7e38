//! Mini-batch training with best-validation checkpointing, and prediction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::input::{serialize_input, ModelInput};
use super::model::{accumulate_example, bce, forward};
use super::optim::{adamw_step, AdamState, TrainConfig};
use super::params::{EncoderConfig, ModelParams};
use super::vocab::Vocab;
use crate::ablation::AblationCondition;
use crate::corpus::TrainingExample;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A serialized example ready for the encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub tokens: Vec<u32>,
    pub label: bool,
}

pub fn encode_examples(
    examples: &[TrainingExample],
    condition: AblationCondition,
    vocab: &Vocab,
    max_len: usize,
) -> Result<Vec<Encoded>> {
    examples
        .iter()
        .map(|e| {
            Ok(Encoded {
                tokens: serialize_input(&e.as_input(), condition, vocab, max_len)?,
                label: e.label,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    /// 1-based epoch of the returned checkpoint.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub val_accuracy: Vec<f64>,
    pub train_loss: Vec<f64>,
}

pub fn accuracy<T: Scalar>(params: &ModelParams<T>, data: &[Encoded], threshold: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::validation("accuracy over an empty set"));
    }
    let mut correct = 0usize;
    for e in data {
        let p = forward(params, &e.tokens)?.prob.as_f64();
        if (p >= threshold) == e.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Accuracy and mean clamped BCE on `data`.
fn evaluate<T: Scalar>(params: &ModelParams<T>, data: &[Encoded], threshold: f64) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::validation("evaluation over an empty set"));
    }
    let (mut correct, mut loss) = (0usize, 0.0);
    for e in data {
        let p = forward(params, &e.tokens)?.prob;
        if (p.as_f64() >= threshold) == e.label {
            correct += 1;
        }
        loss += bce(p, e.label).0.as_f64();
    }
    let n = data.len() as f64;
    Ok((correct as f64 / n, loss / n))
}

/// (epoch, accuracy, loss, params)
type Checkpoint<T> = (usize, f64, f64, ModelParams<T>);

/// Trains once and keeps, for each monitor set, the parameters of the epoch
/// with the best accuracy on it. Ties go to the lower loss, then the earlier
/// epoch.
pub fn train_monitored<T: Scalar>(
    train: &[Encoded],
    monitors: &[&[Encoded]],
    encoder_config: &EncoderConfig,
    train_config: &TrainConfig,
) -> Result<Vec<TrainOutcome<T>>> {
    train_config.validate()?;
    if train.is_empty() {
        return Err(Error::validation("empty training set"));
    }
    if monitors.is_empty() || monitors.iter().any(|m| m.is_empty()) {
        return Err(Error::validation("empty validation set"));
    }
    let mut params = ModelParams::<T>::init(encoder_config)?;
    let mut state = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(train_config.seed ^ 0x5eed_d80b);
    let threshold = encoder_config.threshold;

    let mut best: Vec<Option<Checkpoint<T>>> = vec![None; monitors.len()];
    let mut history: Vec<Vec<f64>> = vec![Vec::new(); monitors.len()];
    let mut losses = Vec::with_capacity(train_config.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0u64;
    for epoch in 1..=train_config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(train_config.batch_size) {
            let mut grads = params.zeros_like();
            let weight = T::one() / T::of(batch.len() as f64);
            for (index, &i) in batch.iter().enumerate() {
                let ex = &train[i];
                let loss = accumulate_example(
                    &params,
                    &ex.tokens,
                    ex.label,
                    weight,
                    &mut grads,
                    Some(&mut dropout_rng),
                )?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { index });
                }
                epoch_loss += loss.as_f64();
            }
            step += 1;
            adamw_step(&mut params, &grads, &mut state, step, train_config)?;
        }
        losses.push(epoch_loss / train.len() as f64);

        for (k, monitor) in monitors.iter().enumerate() {
            let (acc, loss) = evaluate(&params, monitor, threshold)?;
            history[k].push(acc);
            let better = best[k]
                .as_ref()
                .is_none_or(|(_, b, l, _)| acc > *b || (acc == *b && loss < *l));
            if better {
                best[k] = Some((epoch, acc, loss, params.clone()));
            }
        }
    }

    Ok(best
        .into_iter()
        .zip(history)
        .map(|(b, val_accuracy)| {
            let (best_epoch, best_val_accuracy, _, params) = b.expect("at least one epoch");
            TrainOutcome {
                params,
                best_epoch,
                best_val_accuracy,
                val_accuracy,
                train_loss: losses.clone(),
            }
        })
        .collect())
}

/// Trains on `train` and returns the best-validation checkpoint.
pub fn train_encoded<T: Scalar>(
    train: &[Encoded],
    val: &[Encoded],
    encoder_config: &EncoderConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    let mut out = train_monitored(train, &[val], encoder_config, train_config)?;
    Ok(out.remove(0))
}

/// Serializes examples under `condition` and trains on them.
pub fn train<T: Scalar>(
    train_set: &[TrainingExample],
    val_set: &[TrainingExample],
    condition: AblationCondition,
    vocab: &Vocab,
    encoder_config: &EncoderConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::validation("training and validation sets must be non-empty"));
    }
    let max_len = encoder_config.max_len;
    let tr = encode_examples(train_set, condition, vocab, max_len)?;
    let va = encode_examples(val_set, condition, vocab, max_len)?;
    train_encoded(&tr, &va, encoder_config, train_config)
}

/// Probability that `input` raises the partner's love-score, and the
/// thresholded decision (`p >= threshold`).
pub fn predict<T: Scalar>(
    params: &ModelParams<T>,
    input: &ModelInput<'_>,
    condition: AblationCondition,
    vocab: &Vocab,
    threshold: f64,
) -> Result<(f64, bool)> {
    let tokens = serialize_input(input, condition, vocab, params.config.max_len)?;
    let p = forward(params, &tokens)?.prob.as_f64();
    Ok((p, p >= threshold))
}
