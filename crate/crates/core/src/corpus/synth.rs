//! Synthetic speed-dating corpus with a known, personality-dependent ground
//! truth.
//!
//! Every utterance is `<style keyword> <topic>`. Each profile carries two
//! latent preferences written into designated scales. An utterance raises
//! the partner's love-score iff it is empathetic toward a partner whose
//! empathy preference exceeds 0.5, or humorous toward a partner whose humor
//! preference exceeds 0.5. The rule never looks at the history, and the
//! preference patterns are dealt so that each style's increase rate is
//! exactly one half.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DialogueRecord, LoveScaleEvent, PersonalityProfile, Utterance, LOVE_ITEMS};
use crate::error::{Error, Result};

/// Scale holding the partner's appetite for empathy.
pub const EMPATHY_PREFERENCE_SCALE: &str = "Multidimensional Empathy Scale";
/// Scale holding the partner's appetite for humor.
pub const HUMOR_PREFERENCE_SCALE: &str = "Sense of Leisure Scale";
/// Distractor scale with no influence on the ground truth.
pub const DISTRACTOR_SCALE: &str = "Loneliness Scale";
pub const TOPIC_ITEM: &str = "Topics to Talk About";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Style {
    Empathy,
    Humor,
    Brag,
    Question,
    TopicShift,
}

impl Style {
    pub const ALL: [Style; 5] = [
        Style::Empathy,
        Style::Humor,
        Style::Brag,
        Style::Question,
        Style::TopicShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Style::Empathy => "empathy",
            Style::Humor => "humor",
            Style::Brag => "brag",
            Style::Question => "question",
            Style::TopicShift => "topic-shift",
        }
    }
}

/// Keywords marking each style, plus the topic vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleLexicon {
    pub empathy: Vec<String>,
    pub humor: Vec<String>,
    pub brag: Vec<String>,
    pub question: Vec<String>,
    pub topic_shift: Vec<String>,
    pub topics: Vec<String>,
}

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|w| (*w).to_string()).collect()
}

impl Default for StyleLexicon {
    fn default() -> Self {
        Self {
            empathy: words(&["understand", "agree", "relate", "sympathize"]),
            humor: words(&["haha", "lol", "joking", "hilarious"]),
            brag: words(&["impressive", "rich", "famous", "genius"]),
            question: words(&["what", "why", "how", "where"]),
            topic_shift: words(&["anyway", "besides", "meanwhile", "incidentally"]),
            topics: words(&[
                "travel", "anime", "music", "food", "movies", "sports", "books", "games",
                "cooking", "hiking",
            ]),
        }
    }
}

impl StyleLexicon {
    pub fn keywords(&self, style: Style) -> &[String] {
        match style {
            Style::Empathy => &self.empathy,
            Style::Humor => &self.humor,
            Style::Brag => &self.brag,
            Style::Question => &self.question,
            Style::TopicShift => &self.topic_shift,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(style) = Style::ALL.into_iter().find(|&s| self.keywords(s).is_empty()) {
            return Err(Error::validation(format!("style {} has no keywords", style.name())));
        }
        if self.topics.is_empty() {
            return Err(Error::validation("lexicon has no topics"));
        }
        let mut seen = std::collections::HashSet::new();
        let all = Style::ALL
            .into_iter()
            .flat_map(|s| self.keywords(s))
            .chain(&self.topics);
        for k in all {
            let single = k.split_whitespace().count() == 1 && k.chars().all(|c| c.is_alphanumeric() || c == '-');
            if !single || k.to_lowercase() != *k || !seen.insert(k.as_str()) {
                return Err(Error::validation(format!(
                    "lexicon entry {k:?} must be a unique lowercase word"
                )));
            }
        }
        Ok(())
    }

    /// Style whose keyword opens a token of `text`, if any.
    pub fn style_of(&self, text: &str) -> Option<Style> {
        let tokens: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric() && c != '-')
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect();
        Style::ALL.into_iter().find(|&style| {
            self.keywords(style)
                .iter()
                .any(|k| tokens.iter().any(|t| t == k))
        })
    }

    /// Last topic word mentioned in `text`.
    pub fn topic_of(&self, text: &str) -> Option<&str> {
        text.split(|c: char| !c.is_alphanumeric())
            .rev()
            .map(str::to_lowercase)
            .find_map(|t| self.topics.iter().find(|k| **k == t).map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub pairs: usize,
    pub utterances_per_dialogue: usize,
    /// Relative frequency of each style, in [`Style::ALL`] order.
    pub style_weights: [f64; 5],
    pub lexicon: StyleLexicon,
    pub utterance_seconds: f64,
    pub gap_seconds: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            pairs: 50,
            utterances_per_dialogue: 48,
            style_weights: [0.45, 0.45, 0.04, 0.03, 0.03],
            lexicon: StyleLexicon::default(),
            utterance_seconds: 4.0,
            gap_seconds: 1.0,
        }
    }
}

/// Empathy and humor preferences of a profile (first score of each scale).
pub fn preferences(profile: &PersonalityProfile) -> Option<(f64, f64)> {
    let p1 = profile.scale(EMPATHY_PREFERENCE_SCALE)?.first().copied()?;
    let p2 = profile.scale(HUMOR_PREFERENCE_SCALE)?.first().copied()?;
    Some((p1, p2))
}

/// The generating rule: does an utterance of `style` raise `partner`'s
/// love-score?
pub fn ground_truth_increase(style: Style, partner: &PersonalityProfile) -> bool {
    let Some((empathy, humor)) = preferences(partner) else {
        return false;
    };
    match style {
        Style::Empathy => empathy > 0.5,
        Style::Humor => humor > 0.5,
        _ => false,
    }
}

/// Per-speaker style counts by largest remainder over `weights`.
fn style_counts(weights: &[f64; 5], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

fn preference_value(rng: &mut ChaCha8Rng, high: bool) -> f64 {
    let v: f64 = rng.random_range(0.05..0.44);
    if high {
        v + 0.51
    } else {
        v
    }
}

fn synth_profile(
    speaker_id: String,
    pattern: (bool, bool),
    lexicon: &StyleLexicon,
    rng: &mut ChaCha8Rng,
) -> Result<PersonalityProfile> {
    let mut p = PersonalityProfile::blank(speaker_id);
    let topic = lexicon.topics.choose(rng).expect("non-empty topics");
    p.set_item(TOPIC_ITEM, topic.clone())?;
    p.set_scale(EMPATHY_PREFERENCE_SCALE, vec![preference_value(rng, pattern.0)])?;
    p.set_scale(HUMOR_PREFERENCE_SCALE, vec![preference_value(rng, pattern.1)])?;
    p.set_scale(DISTRACTOR_SCALE, vec![rng.random_range(0.05..0.95)])?;
    Ok(p)
}

/// Love-scale items that only ever go up, one item step per increase.
struct RisingScale {
    items: [u8; LOVE_ITEMS],
    next: usize,
}

impl RisingScale {
    fn new() -> Self {
        Self {
            items: [5; LOVE_ITEMS],
            next: 0,
        }
    }

    fn bump(&mut self) -> Option<Vec<u8>> {
        for _ in 0..LOVE_ITEMS {
            let i = self.next;
            self.next = (self.next + 1) % LOVE_ITEMS;
            if self.items[i] < 9 {
                self.items[i] += 1;
                return Some(self.items.to_vec());
            }
        }
        None
    }
}

pub fn synth_corpus(config: &SynthConfig, seed: u64) -> Result<Vec<DialogueRecord>> {
    if config.pairs < 4 {
        return Err(Error::validation(format!(
            "synthetic corpus needs at least 4 pairs, got {}",
            config.pairs
        )));
    }
    let n = config.utterances_per_dialogue;
    if n < 2 {
        return Err(Error::validation("need at least 2 utterances per dialogue"));
    }
    if n.div_ceil(2) > LOVE_ITEMS * 4 {
        return Err(Error::validation(format!(
            "{n} utterances per dialogue exceed the love-scale headroom of a 5-centred scale"
        )));
    }
    if config.style_weights.iter().any(|w| !w.is_finite() || *w < 0.0)
        || config.style_weights.iter().sum::<f64>() <= 0.0
    {
        return Err(Error::validation("style weights must be non-negative with a positive sum"));
    }
    if !(config.utterance_seconds > 0.0 && config.gap_seconds >= 0.0) {
        return Err(Error::validation("utterance timing must be positive"));
    }
    config.lexicon.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patterns = [(false, false), (false, true), (true, false), (true, true)];
    let n_profiles = config.pairs * 2;
    let mut deck: Vec<(bool, bool)> = (0..n_profiles).map(|i| patterns[i % 4]).collect();
    deck.shuffle(&mut rng);

    let mut corpus = Vec::with_capacity(config.pairs);
    for pair in 0..config.pairs {
        let pair_id = format!("pair-{pair:03}");
        let lex = &config.lexicon;
        let px = synth_profile(format!("{pair_id}-X"), deck[2 * pair], lex, &mut rng)?;
        let py = synth_profile(format!("{pair_id}-Y"), deck[2 * pair + 1], lex, &mut rng)?;

        let mut styles_by_speaker = Vec::new();
        for share in [n.div_ceil(2), n / 2] {
            let counts = style_counts(&config.style_weights, share);
            let mut styles: Vec<Style> = Style::ALL
                .iter()
                .zip(&counts)
                .flat_map(|(&s, &c)| std::iter::repeat_n(s, c))
                .collect();
            styles.shuffle(&mut rng);
            styles_by_speaker.push(styles.into_iter());
        }

        let step = config.utterance_seconds + config.gap_seconds;
        let mut utterances = Vec::with_capacity(n);
        let (mut events_x, mut events_y) = (Vec::new(), Vec::new());
        let (mut scale_x, mut scale_y) = (RisingScale::new(), RisingScale::new());
        for i in 0..n {
            let x_speaks = i % 2 == 0;
            let (speaker, listener) = if x_speaks { (&px, &py) } else { (&py, &px) };
            let style = styles_by_speaker[usize::from(!x_speaks)]
                .next()
                .expect("style deck sized to speaker share");
            let keyword = lex.keywords(style).choose(&mut rng).expect("non-empty keywords");
            let topic = lex.topics.choose(&mut rng).expect("non-empty topics");
            let t_start = i as f64 * step;
            utterances.push(Utterance {
                speaker_id: speaker.speaker_id.clone(),
                text: format!("{keyword} {topic}"),
                t_start,
                t_end: t_start + config.utterance_seconds,
            });
            if ground_truth_increase(style, listener) {
                let (scale, events) = if x_speaks {
                    (&mut scale_y, &mut events_y)
                } else {
                    (&mut scale_x, &mut events_x)
                };
                let items = scale
                    .bump()
                    .ok_or_else(|| Error::validation("love-scale saturated"))?;
                events.push(LoveScaleEvent::new(t_start + config.utterance_seconds / 2.0, items)?);
            }
        }
        let record = DialogueRecord {
            pair_id,
            profile_x: px,
            profile_y: py,
            utterances,
            events_x,
            events_y,
        };
        record.validate()?;
        corpus.push(record);
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_examples, Delta};

    #[test]
    fn rule_application() {
        let mut partner = PersonalityProfile::blank("p");
        partner.set_scale(EMPATHY_PREFERENCE_SCALE, vec![0.9]).unwrap();
        partner.set_scale(HUMOR_PREFERENCE_SCALE, vec![0.2]).unwrap();
        assert!(ground_truth_increase(Style::Empathy, &partner));
        assert!(!ground_truth_increase(Style::Humor, &partner));
        for style in [Style::Brag, Style::Question, Style::TopicShift] {
            assert!(!ground_truth_increase(style, &partner));
        }
    }

    #[test]
    fn style_counts_sum() {
        assert_eq!(style_counts(&[0.45, 0.45, 0.04, 0.03, 0.03], 24), vec![11, 11, 1, 1, 0]);
        assert_eq!(style_counts(&[1.0; 5], 10), vec![2; 5]);
    }

    #[test]
    fn corpus_matches_rule() {
        let cfg = SynthConfig {
            pairs: 8,
            ..SynthConfig::default()
        };
        let corpus = synth_corpus(&cfg, 11).unwrap();
        assert_eq!(corpus.len(), 8);
        let examples = build_examples(&corpus, 10, 5.0).unwrap();
        assert_eq!(examples.len(), 8 * 48);
        for e in &examples {
            let style = cfg.lexicon.style_of(&e.target_text).unwrap();
            assert_eq!(e.label, ground_truth_increase(style, &e.partner_profile));
            assert_ne!(e.delta, Delta::Decrease);
        }
        assert_eq!(corpus, synth_corpus(&cfg, 11).unwrap());
    }

    #[test]
    fn rejects_small_configs() {
        let cfg = SynthConfig {
            pairs: 3,
            ..SynthConfig::default()
        };
        assert!(synth_corpus(&cfg, 0).is_err());
    }

    #[test]
    fn lexicon_lookup() {
        let lex = StyleLexicon::default();
        assert_eq!(lex.style_of("I understand travel"), Some(Style::Empathy));
        assert_eq!(lex.style_of("nothing here"), None);
        assert_eq!(lex.topic_of("haha music, and food"), Some("food"));
    }
}
