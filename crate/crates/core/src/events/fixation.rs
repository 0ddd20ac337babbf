use serde::{Deserialize, Serialize};

use super::{EventsError, GazeSample, SessionConfig};
use crate::screen::ScreenPoint;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub centroid: ScreenPoint,
    pub start: f64,
    pub duration: f64,
    pub dispersion: f64,
}

/// Streaming dispersion-threshold identification. The window always holds
/// consecutive valid samples whose dispersion (larger of the x and y spans)
/// is within the threshold.
#[derive(Clone, Debug)]
pub struct FixationDetector {
    threshold: f64,
    min_ms: f64,
    window: Vec<GazeSample>,
}

fn dispersion(window: &[GazeSample]) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in window {
        x0 = x0.min(s.point.x);
        x1 = x1.max(s.point.x);
        y0 = y0.min(s.point.y);
        y1 = y1.max(s.point.y);
    }
    if window.is_empty() {
        0.0
    } else {
        (x1 - x0).max(y1 - y0)
    }
}

impl FixationDetector {
    pub fn new(cfg: &SessionConfig) -> Self {
        Self {
            threshold: cfg.dispersion_threshold,
            min_ms: cfg.min_fixation_ms,
            window: Vec::new(),
        }
    }

    fn summarize(&self) -> Option<Fixation> {
        let first = self.window.first()?;
        let last = self.window.last()?;
        let duration = last.t - first.t;
        if duration < self.min_ms {
            return None;
        }
        let n = self.window.len() as f64;
        let cx = self.window.iter().map(|s| s.point.x).sum::<f64>() / n;
        let cy = self.window.iter().map(|s| s.point.y).sum::<f64>() / n;
        Some(Fixation {
            centroid: ScreenPoint::new(cx, cy),
            start: first.t,
            duration,
            dispersion: dispersion(&self.window),
        })
    }

    /// The window as a fixation, if it already qualifies.
    pub fn current(&self) -> Option<Fixation> {
        self.summarize()
    }

    /// Feeds one sample; returns a fixation that this sample terminated.
    pub fn push(&mut self, s: &GazeSample) -> Option<Fixation> {
        if !s.valid {
            return self.flush();
        }
        self.window.push(*s);
        if dispersion(&self.window) <= self.threshold {
            return None;
        }
        self.window.pop();
        let done = self.summarize();
        if done.is_some() {
            self.window.clear();
            self.window.push(*s);
        } else {
            self.window.push(*s);
            while dispersion(&self.window) > self.threshold {
                self.window.remove(0);
            }
        }
        done
    }

    /// Ends the current window, returning it if it qualified.
    pub fn flush(&mut self) -> Option<Fixation> {
        let done = self.summarize();
        self.window.clear();
        done
    }

    pub fn reset(&mut self) {
        self.window.clear();
    }
}

pub fn detect_fixations(
    samples: &[GazeSample],
    cfg: &SessionConfig,
) -> Result<Vec<Fixation>, EventsError> {
    for w in samples.windows(2) {
        if w[1].t <= w[0].t {
            return Err(EventsError::NonMonotonicTime {
                prev: w[0].t,
                got: w[1].t,
            });
        }
    }
    let mut det = FixationDetector::new(cfg);
    let mut out: Vec<Fixation> = samples.iter().filter_map(|s| det.push(s)).collect();
    out.extend(det.flush());
    Ok(out)
}
