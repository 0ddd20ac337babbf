use serde::{Deserialize, Serialize};

use super::SessionConfig;
use crate::screen::ScreenPoint;

/// A run of frames without features. `offset` is the time of the first valid
/// sample after the run (or one sample period past the last invalid one at
/// the end of a stream).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlinkGap {
    pub onset: f64,
    pub offset: f64,
}

impl BlinkGap {
    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlinkEvent {
    pub onset: f64,
    pub offset: f64,
    pub anchor: ScreenPoint,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlinkOutcome {
    /// Shorter than the noise floor: a tracking dropout.
    Dropout,
    /// Between the noise floor and the intentional minimum.
    Natural,
    /// Long enough, but nothing was being looked at before onset.
    NoAnchor,
    TapBlink(BlinkEvent),
}

impl BlinkOutcome {
    pub fn tap(&self) -> Option<BlinkEvent> {
        match self {
            BlinkOutcome::TapBlink(b) => Some(*b),
            _ => None,
        }
    }
}

/// `anchor` is the centroid of the last fixation before onset, if the gaze
/// has not left it since.
pub fn classify_blink(
    gap: BlinkGap,
    anchor: Option<ScreenPoint>,
    cfg: &SessionConfig,
) -> BlinkOutcome {
    let d = gap.duration();
    if d < cfg.blink_noise_max_ms {
        BlinkOutcome::Dropout
    } else if d < cfg.intentional_blink_min_ms {
        BlinkOutcome::Natural
    } else {
        match anchor {
            Some(anchor) => BlinkOutcome::TapBlink(BlinkEvent {
                onset: gap.onset,
                offset: gap.offset,
                anchor,
            }),
            None => BlinkOutcome::NoAnchor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taxonomy() {
        let cfg = SessionConfig::default();
        let at = Some(ScreenPoint::new(100.0, 200.0));
        let gap = |d: f64| BlinkGap {
            onset: 1000.0,
            offset: 1000.0 + d,
        };
        assert_eq!(classify_blink(gap(50.0), at, &cfg), BlinkOutcome::Dropout);
        assert_eq!(classify_blink(gap(200.0), at, &cfg), BlinkOutcome::Natural);
        assert_eq!(classify_blink(gap(100.0), at, &cfg), BlinkOutcome::Natural);
        assert_eq!(
            classify_blink(gap(350.0), at, &cfg).tap().unwrap().anchor,
            ScreenPoint::new(100.0, 200.0)
        );
        assert_eq!(classify_blink(gap(300.0), at, &cfg).tap().unwrap().offset, 1300.0);
        assert_eq!(classify_blink(gap(350.0), None, &cfg), BlinkOutcome::NoAnchor);
    }
}
