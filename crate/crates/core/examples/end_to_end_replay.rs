//! Generate, calibrate and replay a dataset in-process, then print metrics.
use iscreen::detect::DetectorConfig;
use iscreen::events::Lexicon;
use iscreen::io::{calibrate_dataset, generate, replay, Dataset, GazeModel, GenerateConfig, ReplayOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let noise = std::env::args().nth(1).map_or(Ok(4.0), |s| s.parse())?;
    generate(&GenerateConfig::free_gaze_preset(11, 600, noise), dir.path())?;
    let ds = Dataset::open(dir.path())?;
    println!("{} frames at {}x{}", ds.manifest.frame_count, ds.manifest.screen.w, ds.manifest.screen.h);

    let (model, samples) = calibrate_dataset(&ds, &DetectorConfig::default(), 30)?;
    println!("{} calibration targets, rms {:.2} px", samples.len(), model.rms);

    let out = replay(&ds, &GazeModel::Closed(model), None, Lexicon::english_1000(), &ReplayOptions::default())?;
    let m = &out.metrics;
    println!(
        "gaze error mean {:.1} px, p95 {:.1} px over {} frames",
        m.gaze_error.mean_px, m.gaze_error.p95_px, m.gaze_error.frames
    );
    for (kind, stats) in &m.gaze_error_by_segment {
        println!("  {kind:<12} mean {:.1} px", stats.mean_px);
    }
    println!("{} events, {:.0} frames/s", m.events, m.throughput.fps);
    Ok(())
}
