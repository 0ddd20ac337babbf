//! Renders the reference eye, prints it as ASCII art and writes a PGM.
use iscreen::synth::{render_eye_frame, SyntheticScene};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = SyntheticScene {
        noise_sigma: 3.0,
        rng_seed: 1,
        ..SyntheticScene::reference()
    };
    let frame = render_eye_frame(&scene)?;
    let ramp = b" .:-=+*#%@";
    for y in (0..frame.height()).step_by(2) {
        let row: String = (0..frame.width())
            .map(|x| ramp[usize::from(frame.get(x, y)) * (ramp.len() - 1) / 255] as char)
            .collect();
        println!("{row}");
    }
    println!("pupil pixel {}, glint pixel {}", frame.get(32, 24), frame.get(29, 22));

    let closed = render_eye_frame(&SyntheticScene { eyelid_closure: 1.0, ..scene })?;
    println!("closed eye brightest pixel {}", closed.pixels().iter().max().unwrap());

    let mut pgm = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    pgm.extend_from_slice(frame.pixels());
    let path = std::env::temp_dir().join("iscreen_eye.pgm");
    std::fs::write(&path, pgm)?;
    println!("wrote {}", path.display());
    Ok(())
}
