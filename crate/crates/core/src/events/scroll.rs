use serde::{Deserialize, Serialize};

use super::{GazeSample, SessionConfig};
use crate::screen::ScreenSize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScrollDirection {
    Up,
    Down,
}

/// Classifies a sweep. Only samples within `scroll_window_ms` of the last
/// one are considered; any invalid sample in that span disqualifies it.
///
/// Up means gaze moved from the bottom of the screen to the top (y
/// decreasing). Monotonicity allows backwards steps of up to
/// `scroll_reversal_tolerance` px relative to the running extremum, and the
/// middle 80% of the travel must take at least `scroll_min_sweep_ms`.
pub fn detect_scroll(
    window: &[GazeSample],
    screen: ScreenSize,
    cfg: &SessionConfig,
) -> Option<ScrollDirection> {
    let last = window.last()?;
    let start = window
        .iter()
        .position(|s| last.t - s.t <= cfg.scroll_window_ms)
        .unwrap_or(window.len() - 1);
    let w = &window[start..];
    if w.len() < 2 || w.iter().any(|s| !s.valid) {
        return None;
    }
    let (x0, x1) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s.point.x), hi.max(s.point.x))
    });
    if x1 - x0 > cfg.scroll_max_horizontal_drift * f64::from(screen.w) {
        return None;
    }
    let travel = w[0].point.y - last.point.y;
    let need = cfg.scroll_min_travel * f64::from(screen.h);
    let tol = cfg.scroll_reversal_tolerance;
    let monotone = |sign: f64| {
        // sign = 1: y must not rise above the running minimum by more than tol.
        let mut extremum = sign * w[0].point.y;
        w.iter().all(|s| {
            let y = sign * s.point.y;
            let ok = y <= extremum + tol;
            extremum = extremum.min(y);
            ok
        })
    };
    let spread = || {
        let crossed = |f: f64| {
            w.iter()
                .find(|s| (s.point.y - w[0].point.y).abs() >= f * travel.abs())
                .map_or(last.t, |s| s.t)
        };
        crossed(0.9) - crossed(0.1) >= cfg.scroll_min_sweep_ms
    };
    if travel.abs() < need || !spread() {
        return None;
    }
    if travel >= need && monotone(1.0) {
        Some(ScrollDirection::Up)
    } else if -travel >= need && monotone(-1.0) {
        Some(ScrollDirection::Down)
    } else {
        None
    }
}
