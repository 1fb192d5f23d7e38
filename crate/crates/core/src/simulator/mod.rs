//! Dialogue simulation: a common prefix chosen by cohesion, then one branch
//! per selection method.

mod generator;
mod select;

pub use generator::{generate_distinct, SimTurn, TemplateGenerator, UtteranceGenerator, MAX_DISTINCT_RETRIES};
pub use select::{
    choose_baseline, choose_by_votes, cohesion_scores, cosine, count_votes, select_baseline, select_vote,
    CohesionScorer, EncoderCohesion, Ensemble, VoteOutcome, COHESION_WINDOW,
};

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ablation::AblationCondition;
use crate::corpus::{HistoryTurn, PersonalityProfile, SpeakerTag, DEFAULT_HISTORY_LEN};
use crate::error::{Error, Result};

pub const DEFAULT_INITIAL_UTTERANCE: &str = "What is your hobby?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    X,
    Y,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::X => Party::Y,
            Party::Y => Party::X,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::X => "X",
            Party::Y => "Y",
        })
    }
}

/// The last `history_len` turns, tagged relative to `speaking`.
pub fn tag_history(history: &[SimTurn], speaking: Party, history_len: usize) -> Vec<HistoryTurn> {
    history[history.len().saturating_sub(history_len)..]
        .iter()
        .map(|t| HistoryTurn {
            tag: if t.speaker == speaking { SpeakerTag::Speaker } else { SpeakerTag::Partner },
            text: t.text.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Baseline,
    VotePd,
    VoteD,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [MethodKind::Baseline, MethodKind::VotePd, MethodKind::VoteD];

    pub fn key(self) -> &'static str {
        match self {
            MethodKind::Baseline => "baseline",
            MethodKind::VotePd => "vote-pd",
            MethodKind::VoteD => "vote-d",
        }
    }

    /// Row and column label in the A/B table.
    pub fn display_name(self) -> &'static str {
        match self {
            MethodKind::Baseline => "Baseline",
            MethodKind::VotePd => "P+D",
            MethodKind::VoteD => "D",
        }
    }

    /// Masking condition the voting ensemble must be trained under.
    pub fn condition(self) -> Option<AblationCondition> {
        match self {
            MethodKind::Baseline => None,
            MethodKind::VotePd => Some(AblationCondition::Pd),
            MethodKind::VoteD => Some(AblationCondition::DOnly),
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.key() == s)
            .ok_or_else(|| Error::validation(format!("unknown selection method {s:?} (baseline, vote-pd, vote-d)")))
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SelectionMethod<'a> {
    Baseline,
    VotePd(Ensemble<'a>),
    VoteD(Ensemble<'a>),
}

impl SelectionMethod<'_> {
    pub fn kind(&self) -> MethodKind {
        match self {
            SelectionMethod::Baseline => MethodKind::Baseline,
            SelectionMethod::VotePd(_) => MethodKind::VotePd,
            SelectionMethod::VoteD(_) => MethodKind::VoteD,
        }
    }

    fn ensemble(&self) -> Option<&Ensemble<'_>> {
        match self {
            SelectionMethod::Baseline => None,
            SelectionMethod::VotePd(e) | SelectionMethod::VoteD(e) => Some(e),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.ensemble() {
            if Some(e.condition) != self.kind().condition() {
                return Err(Error::validation(format!(
                    "{} needs an ensemble trained under {:?}, got {}",
                    self.kind(),
                    self.kind().condition(),
                    e.condition
                )));
            }
            if e.models.is_empty() {
                return Err(Error::validation(format!("{} has an empty ensemble", self.kind())));
            }
        }
        Ok(())
    }
}

/// Which speakers' turns vote selection optimizes in the condition branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimize {
    #[default]
    Both,
    YOnly,
}

impl FromStr for Optimize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(Optimize::Both),
            "y-only" => Ok(Optimize::YOnly),
            _ => Err(Error::validation(format!("unknown optimize mode {s:?} (both, y-only)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub profile_x: PersonalityProfile,
    pub profile_y: PersonalityProfile,
    pub seed: u64,
    pub candidates_per_turn: usize,
    /// Utterances in the shared prefix, the initial one included.
    pub common_turns: usize,
    pub condition_turns: usize,
    pub initial_utterance: String,
    pub optimize: Optimize,
    pub history_len: usize,
}

impl SimConfig {
    pub fn new(profile_x: PersonalityProfile, profile_y: PersonalityProfile, seed: u64) -> Self {
        Self {
            profile_x,
            profile_y,
            seed,
            candidates_per_turn: 20,
            common_turns: 10,
            condition_turns: 10,
            initial_utterance: DEFAULT_INITIAL_UTTERANCE.to_string(),
            optimize: Optimize::Both,
            history_len: DEFAULT_HISTORY_LEN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates_per_turn == 0 {
            return Err(Error::validation("candidates_per_turn must be at least 1"));
        }
        if self.common_turns == 0 || self.condition_turns == 0 {
            return Err(Error::validation("turn counts must be at least 1"));
        }
        if self.initial_utterance.trim().is_empty() {
            return Err(Error::validation("initial utterance is empty"));
        }
        self.profile_x.validate()?;
        self.profile_y.validate()
    }

    fn profile(&self, party: Party) -> &PersonalityProfile {
        match party {
            Party::X => &self.profile_x,
            Party::Y => &self.profile_y,
        }
    }

    fn turn_seed(&self, turn: usize) -> u64 {
        self.seed.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(turn as u64)
    }
}

/// How one utterance was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: usize,
    pub speaker: Party,
    /// `seed`, or the method that picked this turn.
    pub selection: String,
    pub candidates: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub votes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cohesion: Option<Vec<f64>>,
    pub chosen: usize,
    pub tie_break: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDialogue {
    pub method: MethodKind,
    pub seed: u64,
    pub common_turns: usize,
    pub utterances: Vec<SimTurn>,
    pub turns: Vec<TurnRecord>,
}

struct Bindings<'a> {
    config: &'a SimConfig,
    gen_x: &'a dyn UtteranceGenerator,
    gen_y: &'a dyn UtteranceGenerator,
    scorer: &'a dyn CohesionScorer,
}

impl Bindings<'_> {
    fn speak(&self, history: &mut Vec<SimTurn>, turns: &mut Vec<TurnRecord>, method: &SelectionMethod<'_>) -> Result<()> {
        let cfg = self.config;
        let turn = history.len();
        let speaker = if turn.is_multiple_of(2) { Party::Y } else { Party::X };
        let generator = if speaker == Party::X { self.gen_x } else { self.gen_y };
        let (candidates, warning) =
            generate_distinct(generator, cfg.profile(speaker), history, cfg.candidates_per_turn, cfg.turn_seed(turn))
                .map_err(|e| Error::Generator { turn, message: e.to_string() })?;

        let voting = match method.ensemble() {
            Some(e) if cfg.optimize == Optimize::Both || speaker == Party::Y => Some(e),
            _ => None,
        };
        let record = match voting {
            Some(ensemble) => {
                let out = select_vote(
                    &candidates,
                    cfg.profile(speaker.other()),
                    cfg.profile(speaker),
                    history,
                    speaker,
                    ensemble,
                    self.scorer,
                    cfg.history_len,
                )?;
                TurnRecord {
                    turn,
                    speaker,
                    selection: method.kind().key().to_string(),
                    candidates,
                    votes: Some(out.votes),
                    cohesion: Some(out.cohesion),
                    chosen: out.chosen,
                    tie_break: out.tie_break,
                    warning,
                }
            }
            None => {
                let (chosen, scores) = select_baseline(&candidates, history, self.scorer)?;
                TurnRecord {
                    turn,
                    speaker,
                    selection: MethodKind::Baseline.key().to_string(),
                    candidates,
                    votes: None,
                    cohesion: Some(scores),
                    chosen,
                    tie_break: false,
                    warning,
                }
            }
        };
        history.push(SimTurn { speaker, text: record.candidates[record.chosen].clone() });
        turns.push(record);
        Ok(())
    }
}

/// Simulates one dialogue per method. The initial utterance is Y's; X answers
/// first. The first `common_turns` utterances are chosen by cohesion and
/// shared; each branch then picks its remaining `condition_turns` with its
/// own method. Branches run in parallel.
pub fn run_simulation(
    config: &SimConfig,
    gen_x: &dyn UtteranceGenerator,
    gen_y: &dyn UtteranceGenerator,
    methods: &[SelectionMethod<'_>],
    scorer: &dyn CohesionScorer,
) -> Result<Vec<SimulatedDialogue>> {
    config.validate()?;
    if methods.is_empty() {
        return Err(Error::validation("no selection methods given"));
    }
    for m in methods {
        m.validate()?;
    }
    let b = Bindings { config, gen_x, gen_y, scorer };

    let mut history = vec![SimTurn { speaker: Party::Y, text: config.initial_utterance.clone() }];
    let mut turns = vec![TurnRecord {
        turn: 0,
        speaker: Party::Y,
        selection: "seed".to_string(),
        candidates: vec![config.initial_utterance.clone()],
        votes: None,
        cohesion: None,
        chosen: 0,
        tie_break: false,
        warning: None,
    }];
    while history.len() < config.common_turns {
        b.speak(&mut history, &mut turns, &SelectionMethod::Baseline)?;
    }

    let total = config.common_turns + config.condition_turns;
    methods
        .par_iter()
        .map(|method| {
            let (mut h, mut t) = (history.clone(), turns.clone());
            while h.len() < total {
                b.speak(&mut h, &mut t, method)?;
            }
            Ok(SimulatedDialogue {
                method: method.kind(),
                seed: config.seed,
                common_turns: config.common_turns,
                utterances: h,
                turns: t,
            })
        })
        .collect()
}

/// Markdown transcript: the shared prefix once, then each branch's tail.
pub fn render_transcript(dialogues: &[SimulatedDialogue]) -> Result<String> {
    let first = dialogues.first().ok_or_else(|| Error::validation("no dialogues to render"))?;
    let k = first.common_turns;
    let mut out = String::from("| | Simulated dialogues |\n|---|---|\n");
    let section = |out: &mut String, label: &str, turns: &[SimTurn]| {
        for (i, t) in turns.iter().enumerate() {
            let cell = if i == turns.len() / 2 { label } else { "" };
            let _ = writeln!(out, "| {cell} | {}: {} |", t.speaker, t.text);
        }
    };
    section(&mut out, &format!("The first {k} utterances"), &first.utterances[..k.min(first.utterances.len())]);
    for d in dialogues {
        let tail = &d.utterances[k.min(d.utterances.len())..];
        let label = format!("The last {} utterances ({} selection)", tail.len(), d.method.display_name());
        section(&mut out, &label, tail);
    }
    Ok(out)
}
