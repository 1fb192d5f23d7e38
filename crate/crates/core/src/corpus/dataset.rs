use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    attach_love_events, DialogueRecord, Delta, HistoryTurn, SpeakerTag, TrainingExample,
};
use crate::error::{Error, Result};

pub const DEFAULT_HISTORY_LEN: usize = 10;

/// One example per utterance spoken by the rated partner in each rater
/// stream. Events a rater attached to their own utterances stay in the
/// corpus but produce no example.
pub fn build_examples(
    corpus: &[DialogueRecord],
    history_len: usize,
    initial_score: f64,
) -> Result<Vec<TrainingExample>> {
    let mut out = Vec::new();
    for dialogue in corpus {
        let streams = attach_love_events(dialogue, initial_score)?;
        let raters = [&dialogue.profile_x, &dialogue.profile_y];
        let rated = [&dialogue.profile_y, &dialogue.profile_x];
        for ((stream, rater), speaker) in streams.iter().zip(raters).zip(rated) {
            for labeled in stream {
                if labeled.utterance.speaker_id != speaker.speaker_id {
                    continue;
                }
                let start = labeled.index.saturating_sub(history_len);
                let history = dialogue.utterances[start..labeled.index]
                    .iter()
                    .map(|u| HistoryTurn {
                        tag: if u.speaker_id == speaker.speaker_id {
                            SpeakerTag::Speaker
                        } else {
                            SpeakerTag::Partner
                        },
                        text: u.text.clone(),
                    })
                    .collect();
                out.push(TrainingExample {
                    pair_id: dialogue.pair_id.clone(),
                    partner_profile: rater.clone(),
                    speaker_profile: speaker.clone(),
                    target_text: labeled.utterance.text.clone(),
                    history,
                    label: labeled.delta == Delta::Increase,
                    delta: labeled.delta,
                });
            }
        }
    }
    Ok(out)
}

/// Seeded class-balanced subsample: `target_pos` positives and `target_neg`
/// negatives (decreases and unchanged pooled), drawn uniformly without
/// replacement and returned in seeded shuffled order.
pub fn balance_dataset(
    examples: &[TrainingExample],
    target_pos: usize,
    target_neg: usize,
    seed: u64,
) -> Result<Vec<TrainingExample>> {
    let (pos, neg): (Vec<&TrainingExample>, Vec<&TrainingExample>) =
        examples.iter().partition(|e| e.label);
    for (class, have, want) in [
        ("positive", pos.len(), target_pos),
        ("negative", neg.len(), target_neg),
    ] {
        if have < want {
            return Err(Error::validation(format!(
                "insufficient {class} examples: requested {want}, available {have}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(target_pos + target_neg);
    for (pool, k) in [(&pos, target_pos), (&neg, target_neg)] {
        let mut idx = index::sample(&mut rng, pool.len(), k).into_vec();
        idx.sort_unstable();
        picked.extend(idx.into_iter().map(|i| pool[i].clone()));
    }
    picked.shuffle(&mut rng);
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LoveScaleEvent, PersonalityProfile, Utterance};

    fn corpus(n_utterances: usize) -> DialogueRecord {
        let utterances = (0..n_utterances)
            .map(|i| Utterance {
                speaker_id: if i % 2 == 0 { "x" } else { "y" }.into(),
                text: format!("u{i}"),
                t_start: i as f64,
                t_end: i as f64 + 0.9,
            })
            .collect();
        DialogueRecord {
            pair_id: "p".into(),
            profile_x: PersonalityProfile::blank("x"),
            profile_y: PersonalityProfile::blank("y"),
            utterances,
            // X rates Y's utterance 3 up, Y rates X's utterance 4 down.
            events_x: vec![LoveScaleEvent::new(3.5, vec![6; 13]).unwrap()],
            events_y: vec![LoveScaleEvent::new(4.5, vec![4; 13]).unwrap()],
        }
    }

    #[test]
    fn history_windows() {
        let ex = build_examples(&[corpus(30)], 10, 5.0).unwrap();
        assert_eq!(ex.len(), 30);
        let at3 = ex.iter().find(|e| e.target_text == "u3").unwrap();
        assert_eq!(at3.history.len(), 3);
        assert!(at3.label);
        assert_eq!(at3.partner_profile.speaker_id, "x");
        assert_eq!(at3.speaker_profile.speaker_id, "y");
        assert_eq!(at3.history[0].tag, SpeakerTag::Partner);
        assert_eq!(at3.history[1].tag, SpeakerTag::Speaker);

        let at25 = ex.iter().find(|e| e.target_text == "u25").unwrap();
        let texts: Vec<_> = at25.history.iter().map(|h| h.text.as_str()).collect();
        let expected: Vec<String> = (15..25).map(|i| format!("u{i}")).collect();
        assert_eq!(texts, expected);

        let at4 = ex.iter().find(|e| e.target_text == "u4").unwrap();
        assert_eq!(at4.delta, Delta::Decrease);
        assert!(!at4.label);
        assert_eq!(ex.iter().filter(|e| e.label).count(), 1);
    }

    #[test]
    fn events_on_own_utterances_produce_no_example() {
        let mut d = corpus(6);
        // X's event now lands on X's own utterance 2.
        d.events_x = vec![LoveScaleEvent::new(2.5, vec![7; 13]).unwrap()];
        let ex = build_examples(&[d], 10, 5.0).unwrap();
        assert_eq!(ex.len(), 6);
        assert!(ex.iter().all(|e| !e.label));
    }

    #[test]
    fn balance_counts_and_errors() {
        let ex = build_examples(&[corpus(30)], 10, 5.0).unwrap();
        let b = balance_dataset(&ex, 1, 5, 3).unwrap();
        assert_eq!(b.iter().filter(|e| e.label).count(), 1);
        assert_eq!(b.len(), 6);
        assert!(balance_dataset(&ex, 0, 0, 3).unwrap().is_empty());
        let err = balance_dataset(&ex, 2, 0, 3).unwrap_err().to_string();
        assert!(err.contains("positive") && err.contains("available 1"), "{err}");
        assert_eq!(balance_dataset(&ex, 1, 7, 9).unwrap(), balance_dataset(&ex, 1, 7, 9).unwrap());
    }
}
