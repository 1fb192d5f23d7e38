//! Classifier input layout:
//! `[CLS] partner [P-SEP] speaker [SEP] target [D-SEP] history [SEP]`.

use super::vocab::{Vocab, CLS, D_SEP, P_SEP, SEP};
use crate::ablation::AblationCondition;
use crate::corpus::{HistoryTurn, PersonalityProfile, TrainingExample};
use crate::error::{Error, Result};

/// Borrowed view of everything the classifier reads for one prediction.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    pub partner: &'a PersonalityProfile,
    pub speaker: &'a PersonalityProfile,
    pub target: &'a str,
    pub history: &'a [HistoryTurn],
}

impl TrainingExample {
    pub fn as_input(&self) -> ModelInput<'_> {
        ModelInput {
            partner: &self.partner_profile,
            speaker: &self.speaker_profile,
            target: &self.target_text,
            history: &self.history,
        }
    }
}

/// History as `tag: text` lines, newest last.
pub fn render_history(history: &[HistoryTurn]) -> String {
    history
        .iter()
        .map(|h| format!("{}: {}", h.tag.as_str(), h.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Token ids for `input` under `condition`. Masked segments are empty but
/// every separator stays. Over-long inputs lose the oldest history tokens
/// first, then the tail of the longer personality.
pub fn serialize_input(
    input: &ModelInput<'_>,
    condition: AblationCondition,
    vocab: &Vocab,
    max_len: usize,
) -> Result<Vec<u32>> {
    let (mut partner, mut speaker) = if condition.uses_personality() {
        (
            vocab.encode(&input.partner.render_text()),
            vocab.encode(&input.speaker.render_text()),
        )
    } else {
        (Vec::new(), Vec::new())
    };
    let target = vocab.encode(input.target);
    let mut history = if condition.uses_history() {
        vocab.encode(&render_history(input.history))
    } else {
        Vec::new()
    };

    const SEPARATORS: usize = 5;
    let total = |p: &[u32], s: &[u32], h: &[u32]| SEPARATORS + p.len() + s.len() + target.len() + h.len();
    let over = total(&partner, &speaker, &history).saturating_sub(max_len);
    history.drain(..over.min(history.len()));
    while total(&partner, &speaker, &history) > max_len && !(partner.is_empty() && speaker.is_empty()) {
        if partner.len() > speaker.len() {
            partner.pop();
        } else {
            speaker.pop();
        }
    }
    let len = total(&partner, &speaker, &history);
    if len > max_len {
        return Err(Error::validation(format!(
            "target utterance needs {len} tokens, more than max_len {max_len}"
        )));
    }

    let mut ids = Vec::with_capacity(len);
    ids.push(CLS);
    ids.extend(partner);
    ids.push(P_SEP);
    ids.extend(speaker);
    ids.push(SEP);
    ids.extend(target);
    ids.push(D_SEP);
    ids.extend(history);
    ids.push(SEP);
    Ok(ids)
}
