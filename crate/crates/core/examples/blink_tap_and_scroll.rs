//! Drives a session with hand-written gaze: a dwell-blink tap, a natural
//! blink that is ignored, and a downward sweep.
use iscreen::events::{run_session, GazeSample, Lexicon, Session, SessionConfig};
use iscreen::screen::ScreenSize;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let screen = ScreenSize::new(1080, 1920);
    let mut session = Session::new(SessionConfig::default(), screen, None, Lexicon::english_1000())?;
    let dt = 1000.0 / 30.0;
    let mut samples = Vec::new();
    let mut t = 0.0;
    let mut push = |s: &mut Vec<GazeSample>, x: Option<(f64, f64)>| {
        s.push(match x {
            Some((x, y)) => GazeSample::valid(t, x, y),
            None => GazeSample::invalid(t),
        });
        t += dt;
    };
    // Dwell, then a 400 ms blink: a tap.
    (0..15).for_each(|_| push(&mut samples, Some((300.0, 700.0))));
    (0..12).for_each(|_| push(&mut samples, None));
    // Dwell, then a 200 ms blink: natural, no event.
    (0..15).for_each(|_| push(&mut samples, Some((700.0, 900.0))));
    (0..6).for_each(|_| push(&mut samples, None));
    (0..15).for_each(|_| push(&mut samples, Some((700.0, 900.0))));
    // Sweep from the top of the screen to the bottom over 400 ms.
    for k in 0..=12 {
        push(&mut samples, Some((540.0, 300.0 + 1300.0 * f64::from(k) / 12.0)));
    }
    (0..10).for_each(|_| push(&mut samples, Some((540.0, 1600.0))));

    for e in run_session(&mut session, &samples)? {
        println!("{}", serde_json::to_string(&e)?);
    }
    Ok(())
}
