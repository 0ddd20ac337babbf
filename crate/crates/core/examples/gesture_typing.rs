//! Shape-writing on the built-in keyboard: anchor blink, glide, end blink.
use iscreen::events::{
    decode_word, EventsError, GazeSample, KeyboardLayout, Lexicon, Session, SessionConfig, UIEvent, UIEventKind,
};
use iscreen::screen::{ScreenPoint, ScreenSize};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let screen = ScreenSize::new(1080, 1920);
    let layout = KeyboardLayout::qwerty(screen);
    let lexicon = Lexicon::english_1000();

    // Decoder on its own: the ideal path through the letters of a word.
    let path: Vec<ScreenPoint> = "world".chars().map(|c| layout.letter_center(c).unwrap()).collect();
    for c in decode_word(&path, 'w', &layout, &lexicon)? {
        println!("{:>10} {:.3}", c.word, c.score);
    }

    // The same word through the session, ended on the keyboard, then again
    // ended on suggestion slot 1 to take the runner-up instead.
    let mut s = Session::new(SessionConfig::default(), screen, Some(layout.clone()), lexicon)?;
    let bar = layout.suggestion_bar();
    let slot1 = ScreenPoint::new(bar.x + bar.w / 2.0, bar.y + bar.h / 2.0);
    let mut d = Driver { s: &mut s, t: 0.0, events: Vec::new() };
    for end in [None, Some(slot1)] {
        d.look(path[0], 15)?;
        d.blink()?;
        for pair in path.windows(2) {
            for k in 1..=4 {
                d.look(pair[0].lerp(pair[1], f64::from(k) / 4.0), 1)?;
            }
            d.look(pair[1], 6)?;
        }
        if let Some(p) = end {
            d.look(p, 15)?;
        }
        d.blink()?;
    }
    let mut events = d.events;
    events.extend(s.finish());

    for e in &events {
        match &e.kind {
            UIEventKind::WordCandidates { candidates } => {
                let words: Vec<_> = candidates.iter().map(|c| c.word.as_str()).collect();
                println!("{:>8.0} candidates {words:?}", e.t);
            }
            _ => println!("{:>8.0} {}", e.t, serde_json::to_string(e)?),
        }
    }
    Ok(())
}

struct Driver<'a> {
    s: &'a mut Session,
    t: f64,
    events: Vec<UIEvent>,
}

impl Driver<'_> {
    fn look(&mut self, p: ScreenPoint, frames: usize) -> Result<(), EventsError> {
        for _ in 0..frames {
            self.events.extend(self.s.step(GazeSample::valid(self.t, p.x, p.y))?);
            self.t += 1000.0 / 30.0;
        }
        Ok(())
    }

    fn blink(&mut self) -> Result<(), EventsError> {
        self.events.extend(self.s.blink(self.t, 400.0)?);
        self.t += 400.0;
        Ok(())
    }
}
