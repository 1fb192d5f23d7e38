use super::{DialogueRecord, Delta, LabeledUtterance, LoveScaleEvent, LOVE_ITEMS};
use crate::error::{Error, Result};

/// Love-score assumed before a rater's first recorded event (the midpoint of
/// the 9-point scale).
pub const DEFAULT_INITIAL_SCORE: f64 = 5.0;

/// Mean of the 13 love-scale items.
pub fn average_love_items(items: &[u8]) -> Result<f64> {
    if items.len() != LOVE_ITEMS {
        return Err(Error::validation(format!(
            "expected {LOVE_ITEMS} love-scale items, found {}",
            items.len()
        )));
    }
    if let Some(bad) = items.iter().find(|&&v| !(1..=9).contains(&v)) {
        return Err(Error::validation(format!(
            "love-scale item {bad} outside [1, 9]"
        )));
    }
    let sum: u32 = items.iter().map(|&v| u32::from(v)).sum();
    Ok(f64::from(sum) / LOVE_ITEMS as f64)
}

pub fn label_delta(prev_mean: f64, new_mean: f64) -> Result<Delta> {
    if !prev_mean.is_finite() || !new_mean.is_finite() {
        return Err(Error::validation(format!(
            "non-finite love-score comparison ({prev_mean}, {new_mean})"
        )));
    }
    Ok(if new_mean > prev_mean {
        Delta::Increase
    } else if new_mean < prev_mean {
        Delta::Decrease
    } else {
        Delta::Unchanged
    })
}

/// Index of the utterance an event at time `t` belongs to: the utterance
/// active at `t` (latest-started if several), else the most recently ended
/// one, else the first utterance.
fn owning_utterance(dialogue: &DialogueRecord, t: f64) -> usize {
    let mut active = None;
    let mut ended: Option<(f64, usize)> = None;
    for (i, u) in dialogue.utterances.iter().enumerate() {
        if u.t_start <= t && t <= u.t_end {
            active = Some(i);
        } else if u.t_end <= t && ended.is_none_or(|(end, _)| u.t_end >= end) {
            ended = Some((u.t_end, i));
        }
    }
    active.or(ended.map(|(_, i)| i)).unwrap_or(0)
}

fn label_stream(
    dialogue: &DialogueRecord,
    rater_id: &str,
    events: &[LoveScaleEvent],
    initial_score: f64,
) -> Result<Vec<LabeledUtterance>> {
    let mut attached: Vec<Vec<&LoveScaleEvent>> = vec![Vec::new(); dialogue.utterances.len()];
    for e in events {
        attached[owning_utterance(dialogue, e.t)].push(e);
    }

    let mut prev = initial_score;
    let mut out = Vec::with_capacity(dialogue.utterances.len());
    for (index, (utterance, evs)) in dialogue.utterances.iter().zip(attached).enumerate() {
        // Several changes inside one utterance collapse to the net change.
        let (delta, score_after) = match evs.last() {
            Some(last) => {
                let delta = label_delta(prev, last.mean)?;
                prev = last.mean;
                let after = (delta != Delta::Unchanged).then_some(last.mean);
                (delta, after)
            }
            None => (Delta::Unchanged, None),
        };
        out.push(LabeledUtterance {
            index,
            utterance: utterance.clone(),
            rater_id: rater_id.to_string(),
            delta,
            score_after,
        });
    }
    Ok(out)
}

/// Attaches each rater's love-scale events to utterances and labels every
/// utterance by the change it caused. Returns the X-rater stream, then the
/// Y-rater stream; each covers every utterance of the dialogue.
pub fn attach_love_events(
    dialogue: &DialogueRecord,
    initial_score: f64,
) -> Result<[Vec<LabeledUtterance>; 2]> {
    if dialogue.utterances.is_empty() {
        return Err(Error::validation(format!(
            "dialogue {} has no utterances",
            dialogue.pair_id
        )));
    }
    dialogue.validate()?;
    Ok([
        label_stream(
            dialogue,
            &dialogue.profile_x.speaker_id,
            &dialogue.events_x,
            initial_score,
        )?,
        label_stream(
            dialogue,
            &dialogue.profile_y.speaker_id,
            &dialogue.events_y,
            initial_score,
        )?,
    ])
}
