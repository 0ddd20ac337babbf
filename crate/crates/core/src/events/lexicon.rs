use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("word {0:?} is not lowercase a-z")]
    BadWord(String),
    #[error("word {0:?} appears twice")]
    Duplicate(String),
    #[error("weight of {0:?} must be finite and positive")]
    BadWeight(String),
    #[error("invalid lexicon JSON: {0}")]
    Json(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    /// Relative frequency; only ratios matter.
    pub weight: f64,
}

/// Word list for the gesture decoder. JSON form:
/// `{"words":[{"word":"the","weight":53700.0},...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLexicon")]
pub struct Lexicon {
    words: Vec<LexiconEntry>,
}

#[derive(Deserialize)]
struct RawLexicon {
    words: Vec<LexiconEntry>,
}

impl TryFrom<RawLexicon> for Lexicon {
    type Error = LexiconError;

    fn try_from(r: RawLexicon) -> Result<Self, Self::Error> {
        Lexicon::new(r.words)
    }
}

impl Lexicon {
    pub fn new(words: Vec<LexiconEntry>) -> Result<Self, LexiconError> {
        if words.is_empty() {
            return Err(LexiconError::EmptyLexicon);
        }
        let mut seen = HashSet::new();
        for e in &words {
            if e.word.is_empty() || !e.word.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err(LexiconError::BadWord(e.word.clone()));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(LexiconError::BadWeight(e.word.clone()));
            }
            if !seen.insert(e.word.as_str()) {
                return Err(LexiconError::Duplicate(e.word.clone()));
            }
        }
        Ok(Self { words })
    }

    /// Equal-weight lexicon, convenient in tests.
    pub fn uniform<S: AsRef<str>>(words: &[S]) -> Result<Self, LexiconError> {
        Self::new(
            words
                .iter()
                .map(|w| LexiconEntry {
                    word: w.as_ref().to_string(),
                    weight: 1.0,
                })
                .collect(),
        )
    }

    /// The bundled 1000 most frequent English words, weighted by occurrences
    /// per million.
    pub fn english_1000() -> Self {
        Self::from_json(include_str!("../../data/lexicon_en_1000.json"))
            .expect("bundled lexicon is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        serde_json::from_str(text).map_err(|e| LexiconError::Json(e.to_string()))
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lexicon_loads() {
        let l = Lexicon::english_1000();
        assert_eq!(l.len(), 1000);
        assert_eq!(l.entries()[0].word, "the");
    }

    #[test]
    fn validation() {
        assert_eq!(Lexicon::uniform::<&str>(&[]), Err(LexiconError::EmptyLexicon));
        assert_eq!(
            Lexicon::uniform(&["ok", "Bad"]),
            Err(LexiconError::BadWord("Bad".into()))
        );
        assert_eq!(
            Lexicon::uniform(&["a", "a"]),
            Err(LexiconError::Duplicate("a".into()))
        );
        assert!(Lexicon::from_json(r#"{"words":[{"word":"x","weight":0}]}"#).is_err());
        assert!(Lexicon::from_json(r#"{"words":[]}"#).is_err());
    }
}
