use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::screen::{Rect, ScreenPoint, ScreenSize};

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("unknown key label {0:?}")]
    BadLabel(String),
    #[error("letter {0:?} appears {1} times")]
    LetterCount(char, usize),
    #[error("keys {0:?} and {1:?} overlap")]
    Overlap(String, String),
    #[error("layout needs a suggestion bar with at least one slot")]
    NoSuggestionSlots,
    #[error("invalid layout JSON: {0}")]
    Json(String),
}

/// A key's meaning: a letter a–z or a named action.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KeyLabel {
    Letter(char),
    Action(String),
}

impl TryFrom<String> for KeyLabel {
    type Error = LayoutError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_ascii_lowercase() => Ok(KeyLabel::Letter(c)),
            _ if s.len() > 1 && s.chars().all(|c| c.is_ascii_lowercase() || c == '_') => {
                Ok(KeyLabel::Action(s))
            }
            _ => Err(LayoutError::BadLabel(s)),
        }
    }
}

impl From<KeyLabel> for String {
    fn from(k: KeyLabel) -> String {
        k.to_string()
    }
}

impl fmt::Display for KeyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyLabel::Letter(c) => write!(f, "{c}"),
            KeyLabel::Action(a) => f.write_str(a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Key {
    pub label: KeyLabel,
    pub rect: Rect,
}

/// On-screen keyboard. Loaded from JSON of the form
/// `{"keys":[{"label":"q","rect":{"x":0,"y":1320,"w":108,"h":150}},...],
///   "suggestion_bar":{...},"suggestion_slots":3}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayout")]
pub struct KeyboardLayout {
    keys: Vec<Key>,
    suggestion_bar: Rect,
    suggestion_slots: usize,
}

#[derive(Deserialize)]
struct RawLayout {
    keys: Vec<Key>,
    suggestion_bar: Rect,
    #[serde(default = "three")]
    suggestion_slots: usize,
}

fn three() -> usize {
    3
}

impl TryFrom<RawLayout> for KeyboardLayout {
    type Error = LayoutError;

    fn try_from(r: RawLayout) -> Result<Self, Self::Error> {
        KeyboardLayout::new(r.keys, r.suggestion_bar, r.suggestion_slots)
    }
}

const ROWS: [&str; 3] = ["qwertyuiop", "asdfghjkl", "zxcvbnm"];

impl KeyboardLayout {
    pub fn new(
        keys: Vec<Key>,
        suggestion_bar: Rect,
        suggestion_slots: usize,
    ) -> Result<Self, LayoutError> {
        if suggestion_slots == 0 {
            return Err(LayoutError::NoSuggestionSlots);
        }
        for c in 'a'..='z' {
            let n = keys
                .iter()
                .filter(|k| k.label == KeyLabel::Letter(c))
                .count();
            if n != 1 {
                return Err(LayoutError::LetterCount(c, n));
            }
        }
        let rects = keys.iter().map(|k| (k.label.to_string(), k.rect));
        let all: Vec<_> = rects
            .chain(std::iter::once(("suggestion_bar".to_string(), suggestion_bar)))
            .collect();
        for (i, (a, ra)) in all.iter().enumerate() {
            for (b, rb) in &all[i + 1..] {
                if ra.overlaps(rb) {
                    return Err(LayoutError::Overlap(a.clone(), b.clone()));
                }
            }
        }
        Ok(Self {
            keys,
            suggestion_bar,
            suggestion_slots,
        })
    }

    /// Three letter rows plus backspace and a space bar, bottom-aligned, with
    /// the suggestion bar above them. On a 1080×1920 screen keys are 108×150
    /// and the bar spans y 1220..1320.
    pub fn qwerty(screen: ScreenSize) -> Self {
        let s = f64::from(screen.w) / 1080.0;
        // Whole-pixel sizes keep shared key edges exactly equal.
        let (kw, kh) = ((108.0 * s).floor(), (150.0 * s).round());
        let bottom = f64::from(screen.h);
        let top = bottom - 4.0 * kh;
        let mut keys = Vec::new();
        for (r, row) in ROWS.iter().enumerate() {
            let indent = [0.0, 0.5, 1.5][r] * kw;
            for (i, c) in row.chars().enumerate() {
                keys.push(Key {
                    label: KeyLabel::Letter(c),
                    rect: Rect::new(indent + i as f64 * kw, top + r as f64 * kh, kw, kh),
                });
            }
        }
        keys.push(Key {
            label: KeyLabel::Action("backspace".into()),
            rect: Rect::new(8.5 * kw, top + 2.0 * kh, 1.5 * kw, kh),
        });
        keys.push(Key {
            label: KeyLabel::Action("space".into()),
            rect: Rect::new(2.0 * kw, top + 3.0 * kh, 6.0 * kw, kh),
        });
        let bar_h = (100.0 * s).round();
        let bar = Rect::new(0.0, top - bar_h, f64::from(screen.w), bar_h);
        Self::new(keys, bar, 3).expect("built-in layout is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, LayoutError> {
        serde_json::from_str(text).map_err(|e| LayoutError::Json(e.to_string()))
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }

    pub fn suggestion_bar(&self) -> Rect {
        self.suggestion_bar
    }

    pub fn suggestion_slots(&self) -> usize {
        self.suggestion_slots
    }

    pub fn key_at(&self, p: ScreenPoint) -> Option<&Key> {
        self.keys.iter().find(|k| k.rect.contains(p))
    }

    pub fn letter_center(&self, c: char) -> Option<ScreenPoint> {
        self.keys
            .iter()
            .find(|k| k.label == KeyLabel::Letter(c))
            .map(|k| k.rect.center())
    }

    /// Width of the `a` key, the unit of decoder distances.
    pub fn key_width(&self) -> f64 {
        self.keys
            .iter()
            .find(|k| k.label == KeyLabel::Letter('a'))
            .map(|k| k.rect.w)
            .expect("every layout has an a key")
    }

    /// Bounding box of all keys (the bar excluded).
    pub fn keyboard_rect(&self) -> Rect {
        self.keys
            .iter()
            .skip(1)
            .fold(self.keys[0].rect, |acc, k| acc.union(&k.rect))
    }

    /// Suggestion slot under `p`, left to right.
    pub fn suggestion_slot_at(&self, p: ScreenPoint) -> Option<usize> {
        let bar = self.suggestion_bar;
        if !bar.contains(p) {
            return None;
        }
        let slot = ((p.x - bar.x) / bar.w * self.suggestion_slots as f64) as usize;
        Some(slot.min(self.suggestion_slots - 1))
    }
}
