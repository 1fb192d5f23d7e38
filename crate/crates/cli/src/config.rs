//! The pipeline config file: one JSON object with a section per subcommand.
//! Missing sections and fields take their defaults; command-line flags win
//! over file values.

use std::path::Path;

use lovesim::ablation::CvConfig;
use lovesim::corpus::{SynthConfig, DEFAULT_HISTORY_LEN, DEFAULT_INITIAL_SCORE};
use lovesim::encoder::{EncoderConfig, TrainConfig};
use lovesim::simulator::{Optimize, TemplateGenerator, DEFAULT_INITIAL_UTTERANCE};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub synth: SynthConfig,
    pub annotate: AnnotateConfig,
    pub cv: CvConfig,
    pub encoder: EncoderConfig,
    #[serde(deserialize_with = "over_synthetic")]
    pub train: TrainConfig,
    pub simulate: SimulateConfig,
    pub abtest: AbtestConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            synth: SynthConfig::default(),
            annotate: AnnotateConfig::default(),
            cv: CvConfig::default(),
            encoder: EncoderConfig::default(),
            train: TrainConfig::synthetic(),
            simulate: SimulateConfig::default(),
            abtest: AbtestConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateConfig {
    pub history_len: usize,
    pub initial_score: f64,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        Self { history_len: DEFAULT_HISTORY_LEN, initial_score: DEFAULT_INITIAL_SCORE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub candidates_per_turn: usize,
    pub common_turns: usize,
    pub condition_turns: usize,
    pub initial_utterance: String,
    pub optimize: Optimize,
    pub history_len: usize,
    pub generator: TemplateGenerator,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            candidates_per_turn: 20,
            common_turns: 10,
            condition_turns: 10,
            initial_utterance: DEFAULT_INITIAL_UTTERANCE.to_string(),
            optimize: Optimize::Both,
            history_len: DEFAULT_HISTORY_LEN,
            generator: TemplateGenerator::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbtestConfig {
    pub seed: Option<u64>,
}

/// Fields given in the file override [`TrainConfig::synthetic`], not the
/// fine-tuning defaults.
fn over_synthetic<'de, D: serde::Deserializer<'de>>(d: D) -> Result<TrainConfig, D::Error> {
    use serde::de::Error as _;
    let given = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
    let mut merged = match serde_json::to_value(TrainConfig::synthetic()) {
        Ok(serde_json::Value::Object(m)) => m,
        _ => return Err(D::Error::custom("train defaults do not serialize to an object")),
    };
    for (k, v) in given {
        if !merged.contains_key(&k) {
            return Err(D::Error::custom(format!("unknown train field {k:?}")));
        }
        merged.insert(k, v);
    }
    serde_json::from_value(serde_json::Value::Object(merged)).map_err(D::Error::custom)
}

impl Config {
    pub fn load(path: Option<&Path>) -> lovesim::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => lovesim::corpus::io::read_json(p).map_err(|e| match e {
                lovesim::Error::Json(e) => lovesim::Error::Validation(format!("config {}: {e}", p.display())),
                other => other,
            }),
        }
    }

    /// Applies a `--seed` override to every seeded stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.cv.seed = seed;
        self.encoder.seed = seed;
        self.train.seed = seed;
        self.abtest.seed = Some(seed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sections_keep_defaults() {
        let c: Config = serde_json::from_str(r#"{"synth": {"pairs": 6}, "train": {"epochs": 2}}"#).unwrap();
        assert_eq!(c.synth.pairs, 6);
        assert_eq!(c.synth.utterances_per_dialogue, SynthConfig::default().utterances_per_dialogue);
        assert_eq!(c.train.epochs, 2);
        assert_eq!(c.train.learning_rate, TrainConfig::synthetic().learning_rate);
        assert!(serde_json::from_str::<Config>(r#"{"trian": {}}"#).is_err());
        assert!(serde_json::from_str::<Config>(r#"{"train": {"epoch": 3}}"#).is_err());
        let empty: Config = serde_json::from_str("{}").unwrap();
        assert_eq!(empty, Config::default());
    }
}
