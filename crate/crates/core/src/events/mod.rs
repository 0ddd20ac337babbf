//! Interaction semantics: fixations, blink-taps, scroll sweeps and gesture
//! typing, driven by a deterministic per-session state machine.

mod blink;
mod decode;
mod fixation;
mod layout;
mod lexicon;
mod scroll;
mod session;

pub use blink::{classify_blink, BlinkEvent, BlinkGap, BlinkOutcome};
pub use decode::{
    decode_word, dtw_distance, resample_path, Candidate, DecodeError, WordDecoder, FREQUENCY_WEIGHT, RESAMPLE_POINTS,
    TOP_K,
};
pub use fixation::{detect_fixations, Fixation, FixationDetector};
pub use layout::{Key, KeyLabel, KeyboardLayout, LayoutError};
pub use lexicon::{Lexicon, LexiconEntry, LexiconError};
pub use scroll::{detect_scroll, ScrollDirection};
pub use session::{run_session, Mode, Session, SessionSnapshot};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::screen::ScreenPoint;

#[derive(Debug, Error, PartialEq)]
pub enum EventsError {
    #[error("sample time {got} ms is not after {prev} ms")]
    NonMonotonicTime { prev: f64, got: f64 },
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
}

/// One screen-space gaze estimate. `point` is meaningless when `valid` is
/// false (no features in that frame).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t: f64,
    pub point: ScreenPoint,
    pub valid: bool,
}

impl GazeSample {
    pub fn valid(t: f64, x: f64, y: f64) -> Self {
        Self {
            t,
            point: ScreenPoint::new(x, y),
            valid: true,
        }
    }

    pub fn invalid(t: f64) -> Self {
        Self {
            t,
            point: ScreenPoint::default(),
            valid: false,
        }
    }
}

/// Timing and geometry constants of the interaction engine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub min_fixation_ms: f64,
    pub dispersion_threshold: f64,
    pub intentional_blink_min_ms: f64,
    pub blink_noise_max_ms: f64,
    pub scroll_window_ms: f64,
    /// Fraction of screen height.
    pub scroll_min_travel: f64,
    /// Fraction of screen width.
    pub scroll_max_horizontal_drift: f64,
    /// Largest backwards step, in px, still counted as monotone.
    pub scroll_reversal_tolerance: f64,
    /// Shortest time, in ms, between passing 10% and 90% of the travel.
    /// Keeps single saccades from reading as sweeps.
    pub scroll_min_sweep_ms: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            min_fixation_ms: 150.0,
            dispersion_threshold: 30.0,
            intentional_blink_min_ms: 300.0,
            blink_noise_max_ms: 100.0,
            scroll_window_ms: 600.0,
            scroll_min_travel: 0.5,
            scroll_max_horizontal_drift: 0.15,
            scroll_reversal_tolerance: 10.0,
            scroll_min_sweep_ms: 150.0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), EventsError> {
        let bad = |m: &str| Err(EventsError::InvalidConfig(m.to_string()));
        let all = [
            self.min_fixation_ms,
            self.dispersion_threshold,
            self.intentional_blink_min_ms,
            self.blink_noise_max_ms,
            self.scroll_window_ms,
            self.scroll_min_travel,
            self.scroll_max_horizontal_drift,
            self.scroll_reversal_tolerance,
            self.scroll_min_sweep_ms,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("all values must be finite and non-negative");
        }
        if self.blink_noise_max_ms >= self.intentional_blink_min_ms {
            return bad("blink_noise_max_ms must be below intentional_blink_min_ms");
        }
        if self.dispersion_threshold == 0.0 || self.scroll_window_ms == 0.0 {
            return bad("dispersion_threshold and scroll_window_ms must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UIEventKind {
    Tap { x: f64, y: f64 },
    ScrollUp,
    ScrollDown,
    KeyAnchor { key: char },
    WordCandidates { candidates: Vec<Candidate> },
    WordCommit { word: String },
}

/// One line of the event log: `{"t":ms,"kind":...,payload}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UIEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: UIEventKind,
}

impl UIEvent {
    pub fn new(t: f64, kind: UIEventKind) -> Self {
        Self { t, kind }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            UIEventKind::Tap { .. } => "tap",
            UIEventKind::ScrollUp => "scroll_up",
            UIEventKind::ScrollDown => "scroll_down",
            UIEventKind::KeyAnchor { .. } => "key_anchor",
            UIEventKind::WordCandidates { .. } => "word_candidates",
            UIEventKind::WordCommit { .. } => "word_commit",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_json_shapes() {
        let tap = UIEvent::new(100.0, UIEventKind::Tap { x: 1.5, y: 2.0 });
        assert_eq!(
            serde_json::to_string(&tap).unwrap(),
            r#"{"t":100.0,"kind":"tap","x":1.5,"y":2.0}"#
        );
        let up = UIEvent::new(5.0, UIEventKind::ScrollUp);
        assert_eq!(serde_json::to_string(&up).unwrap(), r#"{"t":5.0,"kind":"scroll_up"}"#);
        let commit = UIEvent::new(
            7.0,
            UIEventKind::WordCommit {
                word: "hi".into(),
            },
        );
        let line = serde_json::to_string(&commit).unwrap();
        assert_eq!(line, r#"{"t":7.0,"kind":"word_commit","word":"hi"}"#);
        assert_eq!(serde_json::from_str::<UIEvent>(&line).unwrap(), commit);
        let anchor = UIEvent::new(1.0, UIEventKind::KeyAnchor { key: 'h' });
        assert_eq!(
            serde_json::to_string(&anchor).unwrap(),
            r#"{"t":1.0,"kind":"key_anchor","key":"h"}"#
        );
    }

    #[test]
    fn config_validation() {
        assert!(SessionConfig::default().validate().is_ok());
        let cfg = SessionConfig {
            blink_noise_max_ms: 300.0,
            ..SessionConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
