//! Dialogue corpus: records, love-scale annotation, example building,
//! balancing, cross-validation folds, and a synthetic corpus with known
//! ground truth.

mod annotate;
mod dataset;
mod folds;
pub mod io;
mod profile;
pub mod synth;

pub use annotate::{attach_love_events, average_love_items, label_delta, DEFAULT_INITIAL_SCORE};
pub use dataset::{balance_dataset, build_examples, DEFAULT_HISTORY_LEN};
pub use folds::{make_folds, Fold};
pub use profile::{
    PersonalityProfile, ProfileItem, ScaleScores, PROFILE_ITEM_NAMES, SCALE_NAMES,
};
pub use synth::{synth_corpus, Style, SynthConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of love-scale items per response.
pub const LOVE_ITEMS: usize = 13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker_id: String,
    pub text: String,
    pub t_start: f64,
    pub t_end: f64,
}

/// A 13-item love-scale response recorded at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoveScaleEvent {
    pub t: f64,
    pub items: Vec<u8>,
    pub mean: f64,
}

impl LoveScaleEvent {
    pub fn new(t: f64, items: Vec<u8>) -> Result<Self> {
        let mean = average_love_items(&items)?;
        Ok(Self { t, items, mean })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() {
            return Err(Error::validation("love-scale event time must be finite"));
        }
        let mean = average_love_items(&self.items)?;
        if (mean - self.mean).abs() > 1e-12 {
            return Err(Error::validation(format!(
                "love-scale event at t={}: stored mean {} differs from item mean {mean}",
                self.t, self.mean
            )));
        }
        Ok(())
    }
}

/// One annotated dialogue. `events_X` is X's impression of Y over time and
/// `events_Y` is Y's impression of X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub pair_id: String,
    #[serde(rename = "profile_X")]
    pub profile_x: PersonalityProfile,
    #[serde(rename = "profile_Y")]
    pub profile_y: PersonalityProfile,
    pub utterances: Vec<Utterance>,
    #[serde(rename = "events_X")]
    pub events_x: Vec<LoveScaleEvent>,
    #[serde(rename = "events_Y")]
    pub events_y: Vec<LoveScaleEvent>,
}

impl DialogueRecord {
    pub fn validate(&self) -> Result<()> {
        let ctx = |msg: String| Error::validation(format!("dialogue {}: {msg}", self.pair_id));
        self.profile_x.validate()?;
        self.profile_y.validate()?;
        let (x, y) = (&self.profile_x.speaker_id, &self.profile_y.speaker_id);
        if x == y {
            return Err(ctx(format!("both speakers share id {x:?}")));
        }

        let mut last_start = f64::NEG_INFINITY;
        let mut last_end_x = f64::NEG_INFINITY;
        let mut last_end_y = f64::NEG_INFINITY;
        for (i, u) in self.utterances.iter().enumerate() {
            if u.text.trim().is_empty() {
                return Err(ctx(format!("utterance {i} has empty text")));
            }
            if !(u.t_start.is_finite() && u.t_end.is_finite())
                || u.t_start < 0.0
                || u.t_start > u.t_end
            {
                return Err(ctx(format!(
                    "utterance {i} has invalid span [{}, {}]",
                    u.t_start, u.t_end
                )));
            }
            if u.t_start < last_start {
                return Err(ctx(format!("utterance {i} is not sorted by start time")));
            }
            last_start = u.t_start;
            let last_end = if &u.speaker_id == x {
                &mut last_end_x
            } else if &u.speaker_id == y {
                &mut last_end_y
            } else {
                return Err(ctx(format!(
                    "utterance {i} has unknown speaker {:?}",
                    u.speaker_id
                )));
            };
            if u.t_start < *last_end {
                return Err(ctx(format!(
                    "utterance {i} overlaps the previous utterance of {:?}",
                    u.speaker_id
                )));
            }
            *last_end = u.t_end;
        }

        for (name, stream) in [("events_X", &self.events_x), ("events_Y", &self.events_y)] {
            for (i, e) in stream.iter().enumerate() {
                e.validate()?;
                if i > 0 {
                    let prev = &stream[i - 1];
                    if e.t < prev.t {
                        return Err(ctx(format!("{name}[{i}] is not sorted by time")));
                    }
                    if e.mean == prev.mean {
                        return Err(ctx(format!(
                            "{name}[{i}] repeats the previous mean {}; events are recorded only on change",
                            e.mean
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Profile of the given speaker id, if it belongs to this dialogue.
    pub fn profile_of(&self, speaker_id: &str) -> Option<&PersonalityProfile> {
        if self.profile_x.speaker_id == speaker_id {
            Some(&self.profile_x)
        } else if self.profile_y.speaker_id == speaker_id {
            Some(&self.profile_y)
        } else {
            None
        }
    }
}

/// Direction of a love-score change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Delta {
    Increase,
    Decrease,
    Unchanged,
}

/// An utterance with the impression change it caused in one rater.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledUtterance {
    /// Position of the utterance in its dialogue.
    pub index: usize,
    pub utterance: Utterance,
    pub rater_id: String,
    pub delta: Delta,
    pub score_after: Option<f64>,
}

/// History speaker tag, relative to the target utterance's speaker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerTag {
    Speaker,
    Partner,
}

impl SpeakerTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SpeakerTag::Speaker => "Speaker",
            SpeakerTag::Partner => "Partner",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub tag: SpeakerTag,
    pub text: String,
}

/// Classifier input with its binary target: does `target_text`, spoken by
/// the owner of `speaker_profile`, raise the partner's love-score?
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub pair_id: String,
    pub partner_profile: PersonalityProfile,
    pub speaker_profile: PersonalityProfile,
    pub target_text: String,
    pub history: Vec<HistoryTurn>,
    pub label: bool,
    /// Ternary label kept for storage; `label` is `delta == Increase`.
    pub delta: Delta,
}
