//! Whitespace-and-punctuation tokenizer and frequency-ranked vocabulary.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const CLS: u32 = 1;
pub const SEP: u32 = 2;
pub const P_SEP: u32 = 3;
pub const D_SEP: u32 = 4;
pub const UNK: u32 = 5;

pub const RESERVED: [&str; 6] = ["[PAD]", "[CLS]", "[SEP]", "[P-SEP]", "[D-SEP]", "[UNK]"];

/// Splits on whitespace, lowercases, and emits each punctuation character
/// as its own token. Decimal points and commas between digits stay inside
/// numbers; hyphens between word characters stay inside words.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut word = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let next = chars.get(i + 1).copied();
        let prev_in_word = word.chars().last();
        if c.is_whitespace() {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
        } else if c.is_alphanumeric()
            || ((c == '.' || c == ',')
                && prev_in_word.is_some_and(|p| p.is_ascii_digit())
                && next.is_some_and(|n| n.is_ascii_digit()))
            || (c == '-' && prev_in_word.is_some() && next.is_some_and(char::is_alphanumeric))
        {
            word.extend(c.to_lowercase());
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            out.push(c.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Token inventory with the six reserved tokens at ids 0-5.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from tokens in id order; the first six must be the
    /// reserved tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::validation("vocabulary must start with the reserved tokens"));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::validation(format!("invalid or duplicate token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocab::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

/// Vocabulary of at most `max_size` entries (reserved tokens included),
/// ordered by descending frequency with lexicographic tie-breaks.
pub fn fit_vocab<S: AsRef<str>>(texts: &[S], max_size: usize) -> Result<Vocab> {
    if max_size < RESERVED.len() + 1 {
        return Err(Error::validation(format!(
            "vocabulary size {max_size} leaves no room beyond the reserved tokens"
        )));
    }
    if texts.is_empty() {
        return Err(Error::validation("cannot fit a vocabulary on an empty corpus"));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in texts {
        for tok in tokenize(text.as_ref()) {
            if !RESERVED.contains(&tok.as_str()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tokens = RESERVED
        .iter()
        .map(|t| (*t).to_string())
        .chain(ranked.into_iter().map(|(t, _)| t))
        .take(max_size)
        .collect();
    Vocab::from_tokens(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Age: 27"), ["age", ":", "27"]);
        assert_eq!(tokenize("Scale: 0.9 1,5"), ["scale", ":", "0.9", "1,5"]);
        assert_eq!(tokenize("Self-Introduction (KiSS-18)."), ["self-introduction", "(", "kiss-18", ")", "."]);
        assert_eq!(tokenize("end. -x"), ["end", ".", "-", "x"]);
        assert_eq!(tokenize("Rosenberg’s"), ["rosenberg", "’", "s"]);
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn frequency_order() {
        let v = fit_vocab(&["a b", "a"], 100).unwrap();
        assert_eq!(&v.tokens()[..6], RESERVED);
        assert_eq!(v.id("a"), 6);
        assert_eq!(v.id("b"), 7);
        assert_eq!(v.id("zzz"), UNK);
        assert_eq!(v, fit_vocab(&["a b", "a"], 100).unwrap());
    }

    #[test]
    fn ties_break_lexicographically_and_size_caps() {
        let v = fit_vocab(&["c b a"], 8).unwrap();
        assert_eq!(v.len(), 8);
        assert_eq!(v.token(6), Some("a"));
        assert_eq!(v.token(7), Some("b"));
        assert!(fit_vocab(&["a"], 6).is_err());
        assert!(fit_vocab::<&str>(&[], 10).is_err());
    }

    #[test]
    fn json_is_token_list() {
        let v = fit_vocab(&["hi there"], 10).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.starts_with("[\"[PAD]\""));
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Vocab>("[\"a\"]").is_err());
    }

    proptest! {
        #[test]
        fn never_emits_empty_tokens(s in "\\PC{0,40}") {
            prop_assert!(tokenize(&s).iter().all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        }
    }
}
