use serde::{Deserialize, Serialize};

use super::{
    classify_blink, detect_scroll, BlinkEvent, BlinkGap, EventsError, Fixation, FixationDetector,
    GazeSample, KeyLabel, KeyboardLayout, Lexicon, ScrollDirection, SessionConfig, UIEvent,
    UIEventKind, WordDecoder,
};
use crate::screen::{ScreenPoint, ScreenSize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Fixating,
    TypingPath,
}

/// What a client needs to resynchronize its screen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub t: Option<f64>,
    pub mode: Mode,
    pub anchor: Option<ScreenPoint>,
    pub typing_key: Option<char>,
    pub path_len: usize,
    pub suggestions: Vec<String>,
}

struct Typing {
    key: char,
    path: Vec<ScreenPoint>,
    /// Path length when the last fixation on the keyboard ended.
    settled: usize,
}

/// One user's interaction state machine.
///
/// Feed samples in time order with [`Session::step`] and close with
/// [`Session::finish`]. A blink-tap lands on the centroid of the last fixation
/// before the blink, provided the gaze has not since moved further than the
/// dispersion threshold from it.
pub struct Session {
    cfg: SessionConfig,
    screen: ScreenSize,
    lexicon: Lexicon,
    keyboard: Option<(KeyboardLayout, WordDecoder)>,
    fixations: FixationDetector,
    last_fixation: Option<Fixation>,
    anchor_live: bool,
    last_t: Option<f64>,
    last_dt: f64,
    gap_onset: Option<f64>,
    scroll_buf: Vec<GazeSample>,
    typing: Option<Typing>,
    fixation_count: usize,
    blink_ended: bool,
}

impl Session {
    pub fn new(
        cfg: SessionConfig,
        screen: ScreenSize,
        layout: Option<KeyboardLayout>,
        lexicon: Lexicon,
    ) -> Result<Self, EventsError> {
        cfg.validate()?;
        let keyboard = layout.map(|l| {
            let d = WordDecoder::new(&l, &lexicon);
            (l, d)
        });
        Ok(Self {
            cfg,
            screen,
            lexicon,
            keyboard,
            fixations: FixationDetector::new(&cfg),
            last_fixation: None,
            anchor_live: false,
            last_t: None,
            last_dt: 0.0,
            gap_onset: None,
            scroll_buf: Vec::new(),
            typing: None,
            fixation_count: 0,
            blink_ended: false,
        })
    }

    /// Replaces the keyboard (as sent by a UI handshake). Any word in progress
    /// is dropped.
    pub fn set_layout(&mut self, layout: Option<KeyboardLayout>) {
        self.typing = None;
        self.keyboard = layout.map(|l| {
            let d = WordDecoder::new(&l, &self.lexicon);
            (l, d)
        });
    }

    pub fn layout(&self) -> Option<&KeyboardLayout> {
        self.keyboard.as_ref().map(|(l, _)| l)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        if self.typing.is_some() {
            Mode::TypingPath
        } else if self.fixations.current().is_some() {
            Mode::Fixating
        } else {
            Mode::Idle
        }
    }

    /// Fixations completed so far.
    pub fn fixation_count(&self) -> usize {
        self.fixation_count
    }

    fn anchor(&self) -> Option<ScreenPoint> {
        self.last_fixation
            .filter(|_| self.anchor_live)
            .map(|f| f.centroid)
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        let suggestions = match (&self.typing, &self.keyboard) {
            (Some(ty), Some((_, dec))) => dec
                .decode(&ty.path, ty.key)
                .map(|c| c.into_iter().map(|c| c.word).collect())
                .unwrap_or_default(),
            _ => Vec::new(),
        };
        SessionSnapshot {
            t: self.last_t,
            mode: self.mode(),
            anchor: self.anchor(),
            typing_key: self.typing.as_ref().map(|t| t.key),
            path_len: self.typing.as_ref().map_or(0, |t| t.path.len()),
            suggestions,
        }
    }

    fn advance_clock(&mut self, t: f64) -> Result<(), EventsError> {
        if let Some(prev) = self.last_t {
            // The first open-eye sample may land exactly where an explicit
            // blink ended.
            let resumes = self.blink_ended && t == prev;
            if !(t > prev || resumes) {
                return Err(EventsError::NonMonotonicTime { prev, got: t });
            }
            if t > prev {
                self.last_dt = t - prev;
            }
        }
        self.last_t = Some(t);
        self.blink_ended = false;
        Ok(())
    }

    fn note_fixation(&mut self, f: Fixation) {
        self.last_fixation = Some(f);
        self.anchor_live = true;
        self.fixation_count += 1;
        if let (Some(ty), Some((layout, _))) = (&mut self.typing, &self.keyboard) {
            if layout.keyboard_rect().contains(f.centroid) {
                ty.settled = ty.path.len();
            }
        }
    }

    fn begin_gap(&mut self, onset: f64) {
        self.gap_onset = Some(onset);
        if let Some(f) = self.fixations.flush() {
            self.note_fixation(f);
        }
        self.scroll_buf.clear();
    }

    pub fn step(&mut self, s: GazeSample) -> Result<Vec<UIEvent>, EventsError> {
        self.advance_clock(s.t)?;
        let mut out = Vec::new();
        if !s.valid {
            if self.gap_onset.is_none() {
                self.begin_gap(s.t);
            }
            return Ok(out);
        }
        if let Some(onset) = self.gap_onset.take() {
            self.end_gap(BlinkGap { onset, offset: s.t }, &mut out);
        }

        if let Some(f) = self.fixations.push(&s) {
            self.note_fixation(f);
        }
        if let Some(f) = self.last_fixation {
            if s.point.distance(f.centroid) > self.cfg.dispersion_threshold {
                self.anchor_live = false;
            }
        }

        if let Some(ty) = &mut self.typing {
            let (layout, _) = self.keyboard.as_ref().expect("typing implies a keyboard");
            if layout.keyboard_rect().contains(s.point) {
                ty.path.push(s.point);
            }
            return Ok(out);
        }

        self.scroll_buf.push(s);
        let horizon = s.t - self.cfg.scroll_window_ms;
        let keep_from = self.scroll_buf.partition_point(|p| p.t < horizon);
        self.scroll_buf.drain(..keep_from);
        let found = (0..self.scroll_buf.len().saturating_sub(1))
            .find_map(|i| detect_scroll(&self.scroll_buf[i..], self.screen, &self.cfg));
        if let Some(dir) = found {
            out.push(UIEvent::new(
                s.t,
                match dir {
                    ScrollDirection::Up => UIEventKind::ScrollUp,
                    ScrollDirection::Down => UIEventKind::ScrollDown,
                },
            ));
            self.scroll_buf.clear();
            self.fixations.reset();
            self.anchor_live = false;
        }
        Ok(out)
    }

    /// Applies an externally timed blink (live feeds): eyes closed at `t` for
    /// `dur` ms. Equivalent to a run of invalid samples over `[t, t+dur)`.
    pub fn blink(&mut self, t: f64, dur: f64) -> Result<Vec<UIEvent>, EventsError> {
        let mut out = Vec::new();
        if self.gap_onset.is_some() {
            // Already inside a gap opened by invalid samples.
            return Ok(out);
        }
        self.advance_clock(t)?;
        self.begin_gap(t);
        self.gap_onset = None;
        let offset = t + dur.max(0.0);
        if offset > t {
            self.last_t = Some(offset);
        }
        self.blink_ended = true;
        self.end_gap(BlinkGap { onset: t, offset }, &mut out);
        Ok(out)
    }

    /// Ends the stream; a gap still open is closed one sample period after
    /// the last sample.
    pub fn finish(&mut self) -> Vec<UIEvent> {
        let mut out = Vec::new();
        if let (Some(onset), Some(last)) = (self.gap_onset.take(), self.last_t) {
            self.end_gap(
                BlinkGap {
                    onset,
                    offset: last + self.last_dt,
                },
                &mut out,
            );
        }
        if let Some(f) = self.fixations.flush() {
            self.note_fixation(f);
        }
        self.scroll_buf.clear();
        out
    }

    fn end_gap(&mut self, gap: BlinkGap, out: &mut Vec<UIEvent>) {
        if let Some(b) = classify_blink(gap, self.anchor(), &self.cfg).tap() {
            self.anchor_live = false;
            self.dispatch_tap(b, out);
        }
    }

    fn dispatch_tap(&mut self, b: BlinkEvent, out: &mut Vec<UIEvent>) {
        let (t, p) = (b.offset, b.anchor);
        if let Some(ty) = self.typing.take() {
            let (layout, dec) = self.keyboard.as_ref().expect("typing implies a keyboard");
            // Leaving the keyboard to blink elsewhere drags a transit tail
            // across other keys; cut the path where the gaze last settled.
            let path = if layout.keyboard_rect().contains(p) {
                &ty.path[..]
            } else {
                &ty.path[..ty.settled.max(1)]
            };
            let Ok(cands) = dec.decode(path, ty.key) else {
                return;
            };
            match layout.suggestion_slot_at(p) {
                Some(slot) => {
                    let pick = &cands[slot.min(cands.len() - 1)];
                    out.push(UIEvent::new(t, UIEventKind::WordCommit { word: pick.word.clone() }));
                }
                None => {
                    let word = cands[0].word.clone();
                    out.push(UIEvent::new(t, UIEventKind::WordCandidates { candidates: cands }));
                    out.push(UIEvent::new(t, UIEventKind::WordCommit { word }));
                }
            }
            return;
        }
        let letter = self.keyboard.as_ref().and_then(|(l, _)| match l.key_at(p) {
            Some(k) => match k.label {
                KeyLabel::Letter(c) => Some(c),
                KeyLabel::Action(_) => None,
            },
            None => None,
        });
        match letter {
            Some(key) => {
                out.push(UIEvent::new(t, UIEventKind::KeyAnchor { key }));
                self.typing = Some(Typing {
                    key,
                    path: vec![p],
                    settled: 1,
                });
                self.scroll_buf.clear();
            }
            None => out.push(UIEvent::new(t, UIEventKind::Tap { x: p.x, y: p.y })),
        }
    }
}

/// Runs a whole stream through a fresh session.
pub fn run_session(session: &mut Session, samples: &[GazeSample]) -> Result<Vec<UIEvent>, EventsError> {
    let mut out = Vec::new();
    for s in samples {
        out.extend(session.step(*s)?);
    }
    out.extend(session.finish());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 1000.0 / 30.0;
    const SCREEN: ScreenSize = ScreenSize::new(1080, 1920);

    struct Trace {
        t: f64,
        samples: Vec<GazeSample>,
    }

    impl Trace {
        fn new() -> Self {
            Self { t: 0.0, samples: Vec::new() }
        }
        fn look(&mut self, x: f64, y: f64, frames: usize) -> &mut Self {
            for _ in 0..frames {
                self.samples.push(GazeSample::valid(self.t, x, y));
                self.t += DT;
            }
            self
        }
        fn glide(&mut self, from: ScreenPoint, to: ScreenPoint, frames: usize) -> &mut Self {
            for k in 1..=frames {
                let p = from.lerp(to, k as f64 / frames as f64);
                self.samples.push(GazeSample::valid(self.t, p.x, p.y));
                self.t += DT;
            }
            self
        }
        fn close(&mut self, frames: usize) -> &mut Self {
            for _ in 0..frames {
                self.samples.push(GazeSample::invalid(self.t));
                self.t += DT;
            }
            self
        }
    }

    fn session(keyboard: bool) -> Session {
        let layout = keyboard.then(|| KeyboardLayout::qwerty(SCREEN));
        let lex = Lexicon::uniform(&["hi", "he", "ha", "hit"]).unwrap();
        Session::new(SessionConfig::default(), SCREEN, layout, lex).unwrap()
    }

    #[test]
    fn fixate_then_blink_taps_icon() {
        let mut tr = Trace::new();
        tr.look(300.0, 400.0, 15).close(11).look(300.0, 400.0, 5);
        let mut s = session(true);
        let ev = run_session(&mut s, &tr.samples).unwrap();
        assert_eq!(ev.len(), 1, "{ev:?}");
        assert_eq!(ev[0].kind, UIEventKind::Tap { x: 300.0, y: 400.0 });
        assert!((ev[0].t - 26.0 * DT).abs() < 1e-9);
    }

    #[test]
    fn short_and_unanchored_blinks_do_nothing() {
        let mut tr = Trace::new();
        tr.look(300.0, 400.0, 15).close(2).look(300.0, 400.0, 3).close(6).look(300.0, 400.0, 2);
        let mut s = session(false);
        assert!(run_session(&mut s, &tr.samples).unwrap().is_empty());

        // Saccade away, then blink before a new fixation forms.
        let mut tr = Trace::new();
        tr.look(300.0, 400.0, 15).look(700.0, 400.0, 2).close(11).look(700.0, 400.0, 2);
        let mut s = session(false);
        assert!(run_session(&mut s, &tr.samples).unwrap().is_empty());

        // Intentional-length blink with no fixation at all.
        let mut tr = Trace::new();
        tr.close(11).look(10.0, 10.0, 2);
        assert!(run_session(&mut session(false), &tr.samples).unwrap().is_empty());
    }

    #[test]
    fn blink_at_end_of_stream_still_taps() {
        let mut tr = Trace::new();
        tr.look(100.0, 200.0, 10).close(10);
        let ev = run_session(&mut session(false), &tr.samples).unwrap();
        assert_eq!(ev.len(), 1);
        assert!((ev[0].t - 20.0 * DT).abs() < 1e-9);
    }

    #[test]
    fn type_hi_with_suggestion_blink() {
        let l = KeyboardLayout::qwerty(SCREEN);
        let h = l.letter_center('h').unwrap();
        let i = l.letter_center('i').unwrap();
        let bar = l.suggestion_bar().center();
        let slot0 = ScreenPoint::new(l.suggestion_bar().w / 6.0, bar.y);
        let mut tr = Trace::new();
        tr.look(h.x, h.y, 10).close(11).look(h.x, h.y, 3).glide(h, i, 6).look(i.x, i.y, 6);
        tr.glide(i, slot0, 4).look(slot0.x, slot0.y, 8).close(11).look(slot0.x, slot0.y, 2);
        let mut s = session(true);
        let ev = run_session(&mut s, &tr.samples).unwrap();
        let kinds: Vec<_> = ev.iter().map(|e| e.kind.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                UIEventKind::KeyAnchor { key: 'h' },
                UIEventKind::WordCommit { word: "hi".into() }
            ]
        );
        assert_eq!(s.mode(), Mode::Idle);
    }

    #[test]
    fn blink_off_bar_emits_candidates_then_commit() {
        let l = KeyboardLayout::qwerty(SCREEN);
        let h = l.letter_center('h').unwrap();
        let t = l.letter_center('t').unwrap();
        let i = l.letter_center('i').unwrap();
        let mut tr = Trace::new();
        tr.look(h.x, h.y, 10).close(11).look(h.x, h.y, 2).glide(h, i, 5).glide(i, t, 5);
        tr.look(t.x, t.y, 8).close(11).look(t.x, t.y, 2);
        let mut s = session(true);
        let ev = run_session(&mut s, &tr.samples).unwrap();
        assert_eq!(ev.len(), 3, "{ev:?}");
        let UIEventKind::WordCandidates { candidates } = &ev[1].kind else {
            panic!("{ev:?}")
        };
        assert_eq!(candidates[0].word, "hit");
        assert_eq!(ev[2].kind, UIEventKind::WordCommit { word: "hit".into() });
        assert_eq!(ev[1].t, ev[2].t);
    }

    #[test]
    fn sweep_scrolls_without_tapping() {
        let mut tr = Trace::new();
        tr.look(540.0, 1700.0, 10);
        tr.glide(ScreenPoint::new(540.0, 1700.0), ScreenPoint::new(540.0, 200.0), 12);
        tr.close(11).look(540.0, 200.0, 3);
        let ev = run_session(&mut session(false), &tr.samples).unwrap();
        assert_eq!(ev.len(), 1, "{ev:?}");
        assert_eq!(ev[0].kind, UIEventKind::ScrollUp);

        let mut tr = Trace::new();
        tr.look(540.0, 200.0, 10);
        tr.glide(ScreenPoint::new(540.0, 200.0), ScreenPoint::new(540.0, 1700.0), 12);
        let ev = run_session(&mut session(false), &tr.samples).unwrap();
        assert_eq!(ev.iter().map(|e| e.kind.clone()).collect::<Vec<_>>(), vec![UIEventKind::ScrollDown]);
    }

    #[test]
    fn empty_stream_is_idle() {
        let mut s = session(true);
        assert!(run_session(&mut s, &[]).unwrap().is_empty());
        assert_eq!(s.mode(), Mode::Idle);
    }

    #[test]
    fn time_must_increase() {
        let mut s = session(false);
        s.step(GazeSample::valid(10.0, 0.0, 0.0)).unwrap();
        assert_eq!(
            s.step(GazeSample::valid(10.0, 0.0, 0.0)),
            Err(EventsError::NonMonotonicTime { prev: 10.0, got: 10.0 })
        );
    }

    #[test]
    fn explicit_blink_message() {
        let mut s = session(false);
        let mut t = 0.0;
        for _ in 0..12 {
            s.step(GazeSample::valid(t, 500.0, 600.0)).unwrap();
            t += 16.0;
        }
        assert!(s.blink(t, 50.0).unwrap().is_empty());
        let ev = s.blink(t + 60.0, 350.0).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].t, t + 410.0);
        assert!(s.step(GazeSample::valid(t + 100.0, 0.0, 0.0)).is_err());
    }
}
