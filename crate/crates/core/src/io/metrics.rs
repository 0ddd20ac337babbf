//! Replay scoring against sidecar truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::SegmentRecord;
use super::sidecar::TruthRecord;
use crate::events::{GazeSample, SessionConfig, UIEvent, UIEventKind};
use crate::screen::ScreenSize;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    /// Labeled, open-eye frames considered.
    pub frames: usize,
    /// Of those, frames where the pipeline produced no gaze point.
    pub missing: usize,
    pub mean_px: f64,
    pub p95_px: f64,
    pub max_px: f64,
}

impl ErrorStats {
    pub fn from_errors(mut errors: Vec<f64>, missing: usize) -> Self {
        let frames = errors.len() + missing;
        if errors.is_empty() {
            return Self {
                frames,
                missing,
                ..Self::default()
            };
        }
        errors.sort_by(f64::total_cmp);
        let n = errors.len();
        Self {
            frames,
            missing,
            mean_px: errors.iter().sum::<f64>() / n as f64,
            p95_px: percentile_nearest_rank(&errors, 0.95),
            max_px: errors[n - 1],
        }
    }
}

/// Nearest-rank percentile of sorted data: element `ceil(q n) - 1`.
pub fn percentile_nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlinkStats {
    /// Truth blink runs long enough to be intentional.
    pub intentional: usize,
    /// Shorter truth blink runs.
    pub other: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Rows are the scripted sweep direction, columns what the session emitted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScrollConfusion {
    pub up_as_up: usize,
    pub up_as_down: usize,
    pub up_missed: usize,
    pub down_as_up: usize,
    pub down_as_down: usize,
    pub down_missed: usize,
    /// Scroll events outside any scripted sweep.
    pub spurious_up: usize,
    pub spurious_down: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecoderRates {
    pub words: usize,
    pub top1: f64,
    pub top3: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub frames: usize,
    pub seconds: f64,
    pub fps: f64,
}

/// Replay report. Everything except `throughput` is a pure function of the
/// inputs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub gaze_error: ErrorStats,
    /// Same statistics per plan segment kind.
    pub gaze_error_by_segment: BTreeMap<String, ErrorStats>,
    pub blink: BlinkStats,
    pub scroll: ScrollConfusion,
    pub decoder: Option<DecoderRates>,
    pub events: usize,
    pub throughput: Throughput,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn gaze_errors(
    samples: &[GazeSample],
    truth: &[TruthRecord],
    segments: &[SegmentRecord],
) -> (ErrorStats, BTreeMap<String, ErrorStats>) {
    let mut all = (Vec::new(), 0usize);
    let mut by: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for (s, rec) in samples.iter().zip(truth) {
        let Some(target) = rec.target() else { continue };
        if rec.blink {
            continue;
        }
        let kind = segments
            .iter()
            .find(|seg| (seg.first..=seg.last).contains(&rec.i))
            .map(|seg| seg.kind.clone());
        let slot = kind.map(|k| by.entry(k).or_default());
        if s.valid {
            let e = s.point.distance(target);
            all.0.push(e);
            if let Some(slot) = slot {
                slot.0.push(e);
            }
        } else {
            all.1 += 1;
            if let Some(slot) = slot {
                slot.1 += 1;
            }
        }
    }
    (
        ErrorStats::from_errors(all.0, all.1),
        by.into_iter()
            .map(|(k, (e, m))| (k, ErrorStats::from_errors(e, m)))
            .collect(),
    )
}

/// Time of the blink's end, as the session sees it: the first frame after
/// the run.
fn blink_runs(truth: &[TruthRecord], frame_ms: f64) -> Vec<(f64, f64)> {
    let mut runs = Vec::new();
    let mut start: Option<u64> = None;
    for rec in truth {
        match (rec.blink, start) {
            (true, None) => start = Some(rec.i),
            (false, Some(s)) => {
                runs.push((s as f64 * frame_ms, rec.i as f64 * frame_ms));
                start = None;
            }
            _ => {}
        }
    }
    if let (Some(s), Some(last)) = (start, truth.last()) {
        runs.push((s as f64 * frame_ms, (last.i + 1) as f64 * frame_ms));
    }
    runs
}

/// Events a blink can cause: taps, key anchors and word commits.
fn blink_event_times(events: &[UIEvent]) -> Vec<f64> {
    let mut t: Vec<f64> = events
        .iter()
        .filter(|e| {
            matches!(
                e.kind,
                UIEventKind::Tap { .. } | UIEventKind::KeyAnchor { .. } | UIEventKind::WordCommit { .. }
            )
        })
        .map(|e| e.t)
        .collect();
    t.dedup();
    t
}

/// Matches blink-driven events to intentional truth runs. An event matches
/// a run when it lands within two frames of the run's end.
pub fn blink_stats(events: &[UIEvent], truth: &[TruthRecord], frame_ms: f64, cfg: &SessionConfig) -> BlinkStats {
    let runs = blink_runs(truth, frame_ms);
    let (intentional, other): (Vec<_>, Vec<_>) = runs
        .into_iter()
        .partition(|(on, off)| off - on >= cfg.intentional_blink_min_ms);
    let mut matched = vec![false; intentional.len()];
    let mut fp = 0;
    for t in blink_event_times(events) {
        let hit = intentional
            .iter()
            .enumerate()
            .find(|(k, (_, off))| !matched[*k] && (t - off).abs() <= 2.0 * frame_ms + 1e-9);
        match hit {
            Some((k, _)) => matched[k] = true,
            None => fp += 1,
        }
    }
    let tp = matched.iter().filter(|&&m| m).count();
    let fn_ = intentional.len() - tp;
    BlinkStats {
        intentional: intentional.len(),
        other: other.len(),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
    }
}

/// Scripted sweeps are `move` segments whose labeled travel qualifies as a
/// scroll under `cfg`. A scroll event belongs to the sweep whose frames span
/// it (plus one frame).
pub fn scroll_confusion(
    events: &[UIEvent],
    truth: &[TruthRecord],
    segments: &[SegmentRecord],
    frame_ms: f64,
    screen: ScreenSize,
    cfg: &SessionConfig,
) -> ScrollConfusion {
    #[derive(PartialEq)]
    enum Dir {
        Up,
        Down,
    }
    let mut sweeps = Vec::new();
    for seg in segments.iter().filter(|s| s.kind == "move") {
        let start = seg
            .first
            .checked_sub(1)
            .and_then(|i| truth.get(i as usize))
            .and_then(|r| r.target());
        let end = truth.get(seg.last as usize).and_then(|r| r.target());
        let (Some(a), Some(b)) = (start, end) else { continue };
        let dt = (seg.last + 1 - seg.first) as f64 * frame_ms;
        let dy = b.y - a.y;
        if dt <= cfg.scroll_window_ms
            && dy.abs() >= cfg.scroll_min_travel * f64::from(screen.h)
            && (b.x - a.x).abs() <= cfg.scroll_max_horizontal_drift * f64::from(screen.w)
        {
            let dir = if dy < 0.0 { Dir::Up } else { Dir::Down };
            let span = (seg.first as f64 * frame_ms, (seg.last + 1) as f64 * frame_ms);
            sweeps.push((dir, span, false));
        }
    }
    let mut c = ScrollConfusion::default();
    for e in events {
        let got = match e.kind {
            UIEventKind::ScrollUp => Dir::Up,
            UIEventKind::ScrollDown => Dir::Down,
            _ => continue,
        };
        let sweep = sweeps
            .iter_mut()
            .find(|(_, (a, b), used)| !*used && e.t >= *a && e.t <= *b + 1e-9);
        match (sweep, got) {
            (Some((want, _, used)), got) => {
                *used = true;
                match (want, got) {
                    (Dir::Up, Dir::Up) => c.up_as_up += 1,
                    (Dir::Up, Dir::Down) => c.up_as_down += 1,
                    (Dir::Down, Dir::Up) => c.down_as_up += 1,
                    (Dir::Down, Dir::Down) => c.down_as_down += 1,
                }
            }
            (None, Dir::Up) => c.spurious_up += 1,
            (None, Dir::Down) => c.spurious_down += 1,
        }
    }
    for (dir, _, used) in &sweeps {
        if !used {
            match dir {
                Dir::Up => c.up_missed += 1,
                Dir::Down => c.down_missed += 1,
            }
        }
    }
    c
}

/// Scores committed words against the words the script meant to type, in
/// order. Top-3 uses the candidate list when one was emitted.
pub fn decoder_rates(events: &[UIEvent], expected: &[String]) -> DecoderRates {
    let mut commits: Vec<(String, Vec<String>)> = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    for e in events {
        match &e.kind {
            UIEventKind::WordCandidates { candidates } => {
                pending = candidates.iter().map(|c| c.word.clone()).collect();
            }
            UIEventKind::WordCommit { word } => {
                let mut top = std::mem::take(&mut pending);
                if top.is_empty() {
                    top.push(word.clone());
                }
                commits.push((word.clone(), top));
            }
            _ => {}
        }
    }
    let n = expected.len();
    let top1 = expected
        .iter()
        .zip(&commits)
        .filter(|(w, (c, _))| *w == c)
        .count();
    let top3 = expected
        .iter()
        .zip(&commits)
        .filter(|(w, (_, cands))| cands.iter().take(3).any(|c| c == *w))
        .count();
    DecoderRates {
        words: n,
        top1: ratio(top1, n),
        top3: ratio(top3, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::UIEventKind;

    fn rec(i: u64, blink: bool, target: Option<(f64, f64)>) -> TruthRecord {
        TruthRecord {
            i,
            du: 0.0,
            dv: 0.0,
            tx: target.map(|t| t.0),
            ty: target.map(|t| t.1),
            blink,
        }
    }

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(&v, 0.95), 19.0);
        assert_eq!(percentile_nearest_rank(&v[..1], 0.95), 1.0);
        let s = ErrorStats::from_errors(vec![3.0, 1.0, 2.0], 1);
        assert_eq!((s.frames, s.missing, s.mean_px, s.max_px), (4, 1, 2.0, 3.0));
    }

    #[test]
    fn blink_matching() {
        let ms = 100.0;
        // Frames 2..=5 closed (400 ms), 8 closed (100 ms).
        let truth: Vec<_> = (0..12)
            .map(|i| rec(i, (2..=5).contains(&i) || i == 8, None))
            .collect();
        let cfg = SessionConfig::default();
        let tap = |t: f64| UIEvent::new(t, UIEventKind::Tap { x: 0.0, y: 0.0 });
        let s = blink_stats(&[tap(600.0)], &truth, ms, &cfg);
        assert_eq!((s.intentional, s.other, s.true_positives), (1, 1, 1));
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
        let s = blink_stats(&[tap(600.0), tap(900.0)], &truth, ms, &cfg);
        assert_eq!(s.false_positives, 1);
        assert_eq!(s.precision, 0.5);
        let s = blink_stats(&[], &truth, ms, &cfg);
        assert_eq!((s.precision, s.recall), (1.0, 0.0));
    }

    #[test]
    fn scroll_matching() {
        let ms = 50.0;
        let mut truth = vec![rec(0, false, Some((540.0, 1800.0)))];
        for k in 1..=10 {
            truth.push(rec(k, false, Some((540.0, 1800.0 - 160.0 * k as f64))));
        }
        let segs = vec![
            SegmentRecord { kind: "fixate".into(), first: 0, last: 0 },
            SegmentRecord { kind: "move".into(), first: 1, last: 10 },
        ];
        let ev = vec![
            UIEvent::new(300.0, UIEventKind::ScrollUp),
            UIEvent::new(2000.0, UIEventKind::ScrollDown),
        ];
        let c = scroll_confusion(&ev, &truth, &segs, ms, ScreenSize::new(1080, 1920), &SessionConfig::default());
        assert_eq!(c.up_as_up, 1);
        assert_eq!(c.spurious_down, 1);
        assert_eq!(c.up_missed + c.down_missed, 0);
    }

    #[test]
    fn decoder_scoring() {
        let ev = vec![
            UIEvent::new(1.0, UIEventKind::WordCommit { word: "hi".into() }),
            UIEvent::new(
                2.0,
                UIEventKind::WordCandidates {
                    candidates: ["cart", "cat"]
                        .iter()
                        .map(|w| crate::events::Candidate { word: w.to_string(), score: 0.0 })
                        .collect(),
                },
            ),
            UIEvent::new(2.0, UIEventKind::WordCommit { word: "cart".into() }),
        ];
        let r = decoder_rates(&ev, &["hi".to_string(), "cat".to_string()]);
        assert_eq!((r.words, r.top1, r.top3), (2, 0.5, 1.0));
    }
}
