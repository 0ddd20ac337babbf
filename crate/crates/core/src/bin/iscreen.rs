use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use iscreen::calibrate::{FeatureRecipe, MlpConfig, RegressorVariant, DEFAULT_DWELL_WINDOW};
use iscreen::events::{KeyboardLayout, Lexicon};
use iscreen::io::replay::{write_replay_outputs, THROUGHPUT_TARGET_FPS};
use iscreen::io::serve::{ServeConfig, ServeSource, Server};
use iscreen::io::{
    calibrate_dataset, generate, read_json, replay, train_regressor, write_json, Dataset, FramePipeline,
    GazeModel, GenerateConfig, IoError, ReplayOptions,
};
use iscreen::screen::ScreenSize;

#[derive(Parser)]
#[command(name = "iscreen", about = "Synthetic eye-camera gaze pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Calibration,
    FreeGaze,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Closed-form affine plus cross-term fit.
    Affine,
    /// Ridge regression on polynomial features.
    Linear,
    Mlp,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a dataset from a generation config or preset.
    Generate {
        /// Generation config JSON.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "calibration")]
        preset: Preset,
        /// Free-gaze frames for the free-gaze preset.
        #[arg(long, default_value_t = 1000)]
        frames: usize,
        /// Sensor noise sigma for presets, intensity levels.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a gaze model from a dataset's calibration segments.
    Calibrate {
        #[arg(long)]
        dataset: PathBuf,
        /// Where to write the model JSON.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "affine")]
        method: Method,
        /// Ridge penalty for the learned methods.
        #[arg(long, default_value_t = 1e-3)]
        lambda: f64,
        /// MLP initialization seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replay options JSON; only the detector section is used.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the full pipeline over a dataset and score it.
    Replay {
        #[arg(long)]
        dataset: PathBuf,
        /// Model JSON from `calibrate`.
        #[arg(long)]
        model: PathBuf,
        /// Keyboard layout JSON; the built-in QWERTY when omitted.
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Lexicon JSON; the bundled English list when omitted.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Replay options JSON: detector, session, conditioning, expected_words.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for the event, gaze and feature logs.
        #[arg(long, default_value = "replay")]
        out: PathBuf,
        /// Metrics JSON path; `<out>/metrics.json` when omitted.
        #[arg(long)]
        metrics_out: Option<PathBuf>,
    },
    /// Stream gaze and events over TCP.
    Serve {
        /// Model JSON from `calibrate`.
        #[arg(long)]
        model: PathBuf,
        /// Replay this dataset; without it clients feed their own gaze.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Keyboard layout JSON; the built-in QWERTY when omitted.
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Lexicon JSON; the bundled English list when omitted.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Replay options JSON: detector, session, conditioning, expected_words.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Send replay frames as fast as possible.
        #[arg(long)]
        no_pacing: bool,
    },
}

fn options(path: Option<&Path>) -> Result<ReplayOptions, IoError> {
    path.map(read_json).transpose().map(Option::unwrap_or_default)
}

fn layout(path: Option<&Path>, screen: ScreenSize) -> Result<KeyboardLayout, IoError> {
    match path {
        Some(p) => KeyboardLayout::from_json(&std::fs::read_to_string(p)?)
            .map_err(|e| IoError::Config(format!("{}: {e}", p.display()))),
        None => Ok(KeyboardLayout::qwerty(screen)),
    }
}

fn lexicon(path: Option<&Path>) -> Result<Lexicon, IoError> {
    match path {
        Some(p) => Lexicon::from_json(&std::fs::read_to_string(p)?)
            .map_err(|e| IoError::Config(format!("{}: {e}", p.display()))),
        None => Ok(Lexicon::english_1000()),
    }
}

fn run(cmd: Cmd) -> Result<(), IoError> {
    match cmd {
        Cmd::Generate {
            config,
            preset,
            frames,
            noise,
            seed,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => GenerateConfig::from_json(&std::fs::read_to_string(p)?)?,
                None => match preset {
                    Preset::Calibration => {
                        let mut c = GenerateConfig::calibration_preset(0);
                        c.noise_sigma = noise;
                        c
                    }
                    Preset::FreeGaze => GenerateConfig::free_gaze_preset(0, frames, noise),
                },
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let ds = generate(&cfg, &out)?;
            println!("wrote {} frames to {}", ds.manifest.frame_count, out.display());
        }
        Cmd::Calibrate {
            dataset,
            model,
            method,
            lambda,
            seed,
            config,
        } => {
            let ds = Dataset::open(&dataset)?;
            let opts = options(config.as_deref())?;
            let variant = match method {
                Method::Affine => {
                    let (m, samples) = calibrate_dataset(&ds, &opts.detector, DEFAULT_DWELL_WINDOW)?;
                    write_json(&model, &m)?;
                    println!("{} targets, rms {:.6} px", samples.len(), m.rms);
                    return Ok(());
                }
                Method::Linear => RegressorVariant::Linear,
                Method::Mlp => RegressorVariant::Mlp(MlpConfig {
                    seed,
                    ..MlpConfig::default()
                }),
            };
            let t = train_regressor(&ds, &opts.detector, FeatureRecipe::default(), lambda, variant)?;
            write_json(&model, &t.model)?;
            println!(
                "{} samples ({} augmented), training loss {:.6}",
                t.samples, t.augmented, t.model.training.final_loss
            );
        }
        Cmd::Replay {
            dataset,
            model,
            layout: layout_path,
            lexicon: lexicon_path,
            config,
            out,
            metrics_out,
        } => {
            let ds = Dataset::open(&dataset)?;
            let model: GazeModel = read_json(&model)?;
            let opts = options(config.as_deref())?;
            let kb = layout(layout_path.as_deref(), ds.manifest.screen)?;
            let lex = lexicon(lexicon_path.as_deref())?;
            let result = replay(&ds, &model, Some(kb), lex, &opts)?;
            let metrics_path = metrics_out.unwrap_or_else(|| out.join(iscreen::io::replay::METRICS_FILE));
            write_replay_outputs(&result, &out, &metrics_path)?;
            let m = &result.metrics;
            println!(
                "{} frames, {} events, mean error {:.2} px, p95 {:.2} px, {:.0} frames/s",
                m.throughput.frames, m.events, m.gaze_error.mean_px, m.gaze_error.p95_px, m.throughput.fps
            );
            if m.throughput.fps < THROUGHPUT_TARGET_FPS {
                eprintln!(
                    "warning: throughput {:.0} frames/s is below {THROUGHPUT_TARGET_FPS}",
                    m.throughput.fps
                );
            }
        }
        Cmd::Serve {
            model,
            dataset,
            layout: layout_path,
            lexicon: lexicon_path,
            config,
            port,
            no_pacing,
        } => {
            let model: GazeModel = read_json(&model)?;
            let opts = options(config.as_deref())?;
            let screen = model.screen();
            let source = match dataset {
                Some(d) => ServeSource::Replay {
                    dataset: Dataset::open(d)?,
                    pipeline: FramePipeline::new(model, opts.detector.clone(), &opts.conditioning)?,
                    pacing: !no_pacing,
                },
                None => ServeSource::Live { fps: 30.0 },
            };
            let cfg = ServeConfig {
                screen,
                layout: Some(layout(layout_path.as_deref(), screen)?),
                lexicon: lexicon(lexicon_path.as_deref())?,
                session: opts.session,
                source,
            };
            let server = Server::bind(&format!("127.0.0.1:{port}"), cfg)?;
            println!("listening on {}", server.local_addr()?);
            server.run()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
