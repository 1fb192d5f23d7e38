//! Candidate utterance generation.

use std::collections::HashSet;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Party;
use crate::corpus::synth::{StyleLexicon, TOPIC_ITEM};
use crate::corpus::{PersonalityProfile, Style};
use crate::error::{Error, Result};

/// One utterance of a simulated dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTurn {
    pub speaker: Party,
    pub text: String,
}

/// Produces `n` candidate replies for `persona`, deterministically per inputs
/// and seed.
pub trait UtteranceGenerator: Sync {
    fn generate(
        &self,
        persona: &PersonalityProfile,
        history: &[SimTurn],
        n: usize,
        seed: u64,
    ) -> Result<Vec<String>>;
}

pub const MAX_DISTINCT_RETRIES: usize = 10;

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Calls `generator` until its `n` candidates are distinct after whitespace
/// normalization, perturbing the seed each attempt. After
/// [`MAX_DISTINCT_RETRIES`] retries the last batch is kept with a warning.
pub fn generate_distinct(
    generator: &dyn UtteranceGenerator,
    persona: &PersonalityProfile,
    history: &[SimTurn],
    n: usize,
    seed: u64,
) -> Result<(Vec<String>, Option<String>)> {
    if n == 0 {
        return Err(Error::validation("candidate count must be at least 1"));
    }
    let mut attempt_seed = seed;
    for attempt in 0..=MAX_DISTINCT_RETRIES {
        let candidates = generator.generate(persona, history, n, attempt_seed)?;
        if candidates.len() != n {
            return Err(Error::validation(format!(
                "generator returned {} candidates, expected {n}",
                candidates.len()
            )));
        }
        if candidates.iter().any(|c| c.trim().is_empty()) {
            return Err(Error::validation("generator returned an empty candidate"));
        }
        let distinct: HashSet<String> = candidates.iter().map(|c| normalize(c)).collect();
        if distinct.len() == n {
            return Ok((candidates, None));
        }
        if attempt == MAX_DISTINCT_RETRIES {
            let msg = format!(
                "{} duplicate candidates kept after {MAX_DISTINCT_RETRIES} retries",
                n - distinct.len()
            );
            warn!("{msg}");
            return Ok((candidates, Some(msg)));
        }
        attempt_seed = attempt_seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    }
    unreachable!("loop returns on its final attempt")
}

/// Style-tagged templates filled with lexicon keywords and a topic.
///
/// Candidate `i` takes style `(s0 + i) mod 5`, so any five consecutive
/// candidates cover every style. Topics follow the last history utterance;
/// topic shifts move to the persona's own topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateGenerator {
    pub lexicon: StyleLexicon,
    /// Per style, in [`Style::ALL`] order; `{keyword}` and `{topic}` are
    /// substituted.
    pub templates: [String; 5],
}

impl Default for TemplateGenerator {
    fn default() -> Self {
        Self {
            lexicon: StyleLexicon::default(),
            templates: std::array::from_fn(|_| "{keyword} {topic}".to_string()),
        }
    }
}

impl TemplateGenerator {
    fn persona_topic<'a>(&'a self, persona: &'a PersonalityProfile) -> Option<&'a str> {
        persona.item(TOPIC_ITEM).and_then(|v| self.lexicon.topic_of(v))
    }
}

impl UtteranceGenerator for TemplateGenerator {
    fn generate(
        &self,
        persona: &PersonalityProfile,
        history: &[SimTurn],
        n: usize,
        seed: u64,
    ) -> Result<Vec<String>> {
        self.lexicon.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topics = &self.lexicon.topics;
        let own = self.persona_topic(persona).unwrap_or(&topics[0]);
        let context = history
            .last()
            .and_then(|t| self.lexicon.topic_of(&t.text))
            .unwrap_or(own);
        let s0 = rng.random_range(0..Style::ALL.len());
        let k0 = rng.random_range(0..usize::MAX / 2);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let style = Style::ALL[(s0 + i) % Style::ALL.len()];
            let keywords = self.lexicon.keywords(style);
            let round = i / Style::ALL.len();
            let keyword = &keywords[(k0 + round) % keywords.len()];
            // Once keywords are exhausted, move to other topics.
            let topic = if round < keywords.len() {
                if style == Style::TopicShift { own } else { context }
            } else {
                &topics[rng.random_range(0..topics.len())]
            };
            let text = self.templates[style as usize]
                .replace("{keyword}", keyword)
                .replace("{topic}", topic);
            out.push(text);
        }
        Ok(out)
    }
}
