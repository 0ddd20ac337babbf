//! Five-target calibration on rendered frames, then mapping fresh gaze.
use iscreen::calibrate::{aggregate_dwell, default_targets, fit_affine_cross, map_gaze, CalibrationSample};
use iscreen::detect::{extract_features, DetectorConfig};
use iscreen::io::{EyeGeometry, TruthMapping};
use iscreen::screen::ScreenSize;
use iscreen::synth::render_eye_frame;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let screen = ScreenSize::new(1080, 1920);
    let eye = EyeGeometry::default();
    let truth = TruthMapping::for_screen(screen, 1.0);
    let detector = DetectorConfig::default();

    let mut samples = Vec::new();
    for (i, &target) in default_targets(screen)?.points().iter().enumerate() {
        let v = truth.invert(target).expect("target is reachable");
        // 40 dwell frames with sensor noise; the median of the tail is kept.
        let vectors: Vec<_> = (0..40)
            .map(|k| {
                let frame = render_eye_frame(&eye.scene(v, 3.0, (i * 100 + k) as u64)).unwrap();
                extract_features(&frame, &detector).vector
            })
            .collect();
        let vector = aggregate_dwell(&vectors, 30).expect("dwell has valid frames");
        println!("target ({:>6.1}, {:>6.1}) vector ({:+.3}, {:+.3})", target.x, target.y, vector.du, vector.dv);
        samples.push(CalibrationSample { vector, target });
    }

    let model = fit_affine_cross(&samples, screen)?;
    println!("x = {:?}\ny = {:?}\nrms {:.3} px", model.x, model.y, model.rms);

    for (k, target) in [(300.0, 500.0), (800.0, 1400.0)].into_iter().enumerate() {
        let target = iscreen::screen::ScreenPoint::new(target.0, target.1);
        let v = truth.invert(target).unwrap();
        let frame = render_eye_frame(&eye.scene(v, 3.0, 9000 + k as u64))?;
        let p = map_gaze(&model, extract_features(&frame, &detector).vector.unwrap());
        println!("looked at ({}, {}), mapped to ({:.1}, {:.1})", target.x, target.y, p.x, p.y);
    }
    Ok(())
}
