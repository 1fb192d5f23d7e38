//! Cohesion scoring and the three utterance selection rules.

use rayon::prelude::*;

use super::SimTurn;
use crate::ablation::AblationCondition;
use crate::corpus::{HistoryTurn, PersonalityProfile};
use crate::encoder::{forward, predict, serialize_input, ModelInput, ModelParams, Vocab};
use crate::error::{Error, Result};

/// Rates how well a candidate fits the recent dialogue.
pub trait CohesionScorer: Sync {
    fn score(&self, candidate: &str, history: &[SimTurn]) -> Result<f64>;

    /// Scores every candidate against the same history.
    fn score_all(&self, candidates: &[String], history: &[SimTurn]) -> Result<Vec<f64>> {
        candidates.par_iter().map(|c| self.score(c, history)).collect()
    }
}

/// Number of trailing history utterances a cohesion score compares against.
pub const COHESION_WINDOW: usize = 3;

/// Mean cosine similarity between the max-pooled encoder representation of
/// the candidate and those of the last [`COHESION_WINDOW`] history
/// utterances; 0 for an empty history.
pub struct EncoderCohesion<'a> {
    pub params: &'a ModelParams<f64>,
    pub vocab: &'a Vocab,
}

impl EncoderCohesion<'_> {
    pub fn represent(&self, text: &str) -> Result<Vec<f64>> {
        let blank = PersonalityProfile::blank("");
        let input = ModelInput { partner: &blank, speaker: &blank, target: text, history: &[] };
        let tokens = serialize_input(&input, AblationCondition::Neither, self.vocab, self.params.config.max_len)?;
        Ok(forward(self.params, &tokens)?.pooled)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

impl EncoderCohesion<'_> {
    fn window_representations(&self, history: &[SimTurn]) -> Result<Vec<Vec<f64>>> {
        history[history.len().saturating_sub(COHESION_WINDOW)..]
            .iter()
            .map(|t| self.represent(&t.text))
            .collect()
    }

    fn score_against(&self, candidate: &str, window: &[Vec<f64>]) -> Result<f64> {
        if candidate.trim().is_empty() {
            return Err(Error::validation("cohesion of an empty candidate"));
        }
        if window.is_empty() {
            return Ok(0.0);
        }
        let c = self.represent(candidate)?;
        Ok(window.iter().map(|h| cosine(&c, h)).sum::<f64>() / window.len() as f64)
    }
}

impl CohesionScorer for EncoderCohesion<'_> {
    fn score(&self, candidate: &str, history: &[SimTurn]) -> Result<f64> {
        self.score_against(candidate, &self.window_representations(history)?)
    }

    fn score_all(&self, candidates: &[String], history: &[SimTurn]) -> Result<Vec<f64>> {
        let window = self.window_representations(history)?;
        candidates.par_iter().map(|c| self.score_against(c, &window)).collect()
    }
}

/// Index of the largest value among `among`; ties go to the lowest index.
fn argmax_among(values: &[f64], among: &[usize]) -> usize {
    let mut best = among[0];
    for &i in &among[1..] {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

pub fn cohesion_scores(candidates: &[String], history: &[SimTurn], scorer: &dyn CohesionScorer) -> Result<Vec<f64>> {
    let scores = scorer.score_all(candidates, history)?;
    if scores.len() != candidates.len() {
        return Err(Error::validation("cohesion scorer returned the wrong number of scores"));
    }
    Ok(scores)
}

/// Argmax of the cohesion scores, lowest index on ties.
pub fn choose_baseline(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::validation("no candidates to select from"));
    }
    let all: Vec<usize> = (0..scores.len()).collect();
    Ok(argmax_among(scores, &all))
}

pub fn select_baseline(
    candidates: &[String],
    history: &[SimTurn],
    scorer: &dyn CohesionScorer,
) -> Result<(usize, Vec<f64>)> {
    let scores = cohesion_scores(candidates, history, scorer)?;
    Ok((choose_baseline(&scores)?, scores))
}

/// Most votes wins. When several candidates share the maximum, the baseline
/// rule picks among them and the tie-break flag is set.
pub fn choose_by_votes(votes: &[usize], scores: &[f64]) -> Result<(usize, bool)> {
    if votes.is_empty() || votes.len() != scores.len() {
        return Err(Error::validation("votes and cohesion scores must be equal, non-empty lists"));
    }
    let max = *votes.iter().max().expect("non-empty");
    let tied: Vec<usize> = (0..votes.len()).filter(|&i| votes[i] == max).collect();
    if tied.len() == 1 {
        return Ok((tied[0], false));
    }
    Ok((argmax_among(scores, &tied), true))
}

/// Fold models of one masking condition, voting together.
#[derive(Debug, Clone, Copy)]
pub struct Ensemble<'a> {
    pub models: &'a [ModelParams<f64>],
    pub condition: AblationCondition,
    pub vocab: &'a Vocab,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteOutcome {
    pub chosen: usize,
    pub votes: Vec<usize>,
    pub cohesion: Vec<f64>,
    pub tie_break: bool,
}

/// Number of ensemble members predicting that each candidate raises the
/// listener's love-score.
pub fn count_votes(
    candidates: &[String],
    listener: &PersonalityProfile,
    speaker: &PersonalityProfile,
    history: &[HistoryTurn],
    ensemble: &Ensemble<'_>,
) -> Result<Vec<usize>> {
    if ensemble.models.is_empty() {
        return Err(Error::validation("vote selection needs a non-empty ensemble"));
    }
    candidates
        .par_iter()
        .map(|c| {
            let input = ModelInput { partner: listener, speaker, target: c, history };
            let mut votes = 0;
            for m in ensemble.models {
                if predict(m, &input, ensemble.condition, ensemble.vocab, ensemble.threshold)?.1 {
                    votes += 1;
                }
            }
            Ok(votes)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn select_vote(
    candidates: &[String],
    listener: &PersonalityProfile,
    speaker: &PersonalityProfile,
    history: &[SimTurn],
    speaking: super::Party,
    ensemble: &Ensemble<'_>,
    scorer: &dyn CohesionScorer,
    history_len: usize,
) -> Result<VoteOutcome> {
    if candidates.is_empty() {
        return Err(Error::validation("no candidates to select from"));
    }
    let tagged = super::tag_history(history, speaking, history_len);
    let votes = count_votes(candidates, listener, speaker, &tagged, ensemble)?;
    let cohesion = cohesion_scores(candidates, history, scorer)?;
    let (chosen, tie_break) = choose_by_votes(&votes, &cohesion)?;
    Ok(VoteOutcome { chosen, votes, cohesion, tie_break })
}
