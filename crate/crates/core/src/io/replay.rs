//! Full-pipeline replay of a recorded dataset: condition, detect, map,
//! interpret; then score against the sidecar.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::metrics::{self, MetricsReport, Throughput};
use super::sidecar::{FeatureRecord, NdjsonWriter};
use super::{write_json, IoError};
use crate::calibrate::{map_gaze, CalibrationModel, LearnedRegressor};
use crate::detect::{extract_features, DetectorConfig, EyeFeatures};
use crate::events::{KeyboardLayout, Lexicon, Session, SessionConfig, UIEvent};
use crate::events::GazeSample;
use crate::frame::Frame;
use crate::preprocess::{augment, AugmentOp, AugmentSpec};
use crate::screen::{ScreenPoint, ScreenSize};

pub const EVENTS_FILE: &str = "events.ndjson";
pub const GAZE_FILE: &str = "gaze.ndjson";
pub const FEATURES_FILE: &str = "features.ndjson";
pub const METRICS_FILE: &str = "metrics.json";

/// Soft throughput floor (frames per second); below it replay warns.
pub const THROUGHPUT_TARGET_FPS: f64 = 120.0;

/// Either model file format; told apart by shape when parsed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GazeModel {
    Closed(CalibrationModel),
    Learned(LearnedRegressor),
}

impl GazeModel {
    pub fn screen(&self) -> ScreenSize {
        match self {
            GazeModel::Closed(m) => m.screen(),
            GazeModel::Learned(m) => m.screen(),
        }
    }

    /// Screen point for one frame's features, if they carry a vector.
    pub fn map(&self, f: &EyeFeatures) -> Option<ScreenPoint> {
        let v = f.vector?;
        match self {
            GazeModel::Closed(m) => Some(map_gaze(m, v)),
            GazeModel::Learned(m) => {
                let fv = m.recipe.features(v, f.pupil.map(|p| p.radius)).ok()?;
                m.predict(&fv).ok()
            }
        }
    }
}

/// Per-frame work shared by replay and the live server.
pub struct FramePipeline {
    pub detector: DetectorConfig,
    pub conditioning: Option<AugmentSpec>,
    pub model: GazeModel,
}

impl FramePipeline {
    pub fn new(model: GazeModel, detector: DetectorConfig, conditioning: &[AugmentOp]) -> Result<Self, IoError> {
        detector.validate().map_err(|e| IoError::Config(e.to_string()))?;
        let conditioning = if conditioning.is_empty() {
            None
        } else {
            let spec = AugmentSpec::new(conditioning.to_vec());
            spec.validate().map_err(|e| IoError::Config(e.to_string()))?;
            Some(spec)
        };
        Ok(Self {
            detector,
            conditioning,
            model,
        })
    }

    pub fn process(&self, frame: &Frame) -> (EyeFeatures, Option<ScreenPoint>) {
        let conditioned;
        let frame = match &self.conditioning {
            Some(spec) => {
                conditioned = augment(frame, spec).expect("spec validated");
                &conditioned
            }
            None => frame,
        };
        let f = extract_features(frame, &self.detector);
        let p = self.model.map(&f);
        (f, p)
    }
}

/// Run configuration shared by `calibrate`, `replay` and `serve`; every
/// field may be omitted from the JSON.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayOptions {
    pub detector: DetectorConfig,
    pub session: SessionConfig,
    /// Applied to every frame before detection.
    pub conditioning: Vec<AugmentOp>,
    /// Words the script types, in order; enables decoder metrics.
    pub expected_words: Vec<String>,
}

/// Gaze log line: `{"t","x","y","valid"}`. Invalid samples repeat the last
/// valid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

impl From<&GazeSample> for GazeRecord {
    fn from(s: &GazeSample) -> Self {
        Self {
            t: s.t,
            x: s.point.x,
            y: s.point.y,
            valid: s.valid,
        }
    }
}

pub struct ReplayOutput {
    pub events: Vec<UIEvent>,
    pub gaze: Vec<GazeSample>,
    pub features: Vec<FeatureRecord>,
    pub metrics: MetricsReport,
}

pub fn replay(
    ds: &Dataset,
    model: &GazeModel,
    layout: Option<KeyboardLayout>,
    lexicon: Lexicon,
    opts: &ReplayOptions,
) -> Result<ReplayOutput, IoError> {
    if model.screen() != ds.manifest.screen {
        return Err(IoError::Mismatch(format!(
            "model screen {}x{} but dataset screen {}x{}",
            model.screen().w,
            model.screen().h,
            ds.manifest.screen.w,
            ds.manifest.screen.h
        )));
    }
    let pipeline = FramePipeline::new(model.clone(), opts.detector.clone(), &opts.conditioning)?;
    let mut session = Session::new(opts.session, ds.manifest.screen, layout, lexicon)
        .map_err(|e| IoError::Config(e.to_string()))?;
    let truth = ds.truth()?;
    let reader = ds.frames()?;
    let header = *reader.header();

    let mut events = Vec::new();
    let mut gaze = Vec::with_capacity(truth.len());
    let mut features = Vec::with_capacity(truth.len());
    let mut last = ScreenPoint::new(f64::from(ds.manifest.screen.w) / 2.0, f64::from(ds.manifest.screen.h) / 2.0);
    let started = Instant::now();
    for (i, frame) in reader.enumerate() {
        let frame = frame?;
        let t = header.frame_time_ms(i as u64);
        let (f, p) = pipeline.process(&frame);
        let sample = match p {
            Some(p) => {
                last = p;
                GazeSample {
                    t,
                    point: p,
                    valid: true,
                }
            }
            None => GazeSample {
                t,
                point: last,
                valid: false,
            },
        };
        events.extend(session.step(sample).map_err(|e| IoError::Format(e.to_string()))?);
        gaze.push(sample);
        features.push(FeatureRecord::new(i as u64, &f));
    }
    events.extend(session.finish());
    let seconds = started.elapsed().as_secs_f64();

    let frame_ms = header.frame_time_ms(1);
    let (gaze_error, by_segment) = metrics::gaze_errors(&gaze, &truth, &ds.manifest.segments);
    let report = MetricsReport {
        gaze_error,
        gaze_error_by_segment: by_segment,
        blink: metrics::blink_stats(&events, &truth, frame_ms, &opts.session),
        scroll: metrics::scroll_confusion(
            &events,
            &truth,
            &ds.manifest.segments,
            frame_ms,
            ds.manifest.screen,
            &opts.session,
        ),
        decoder: (!opts.expected_words.is_empty()).then(|| metrics::decoder_rates(&events, &opts.expected_words)),
        events: events.len(),
        throughput: Throughput {
            frames: gaze.len(),
            seconds,
            fps: if seconds > 0.0 { gaze.len() as f64 / seconds } else { f64::INFINITY },
        },
    };
    Ok(ReplayOutput {
        events,
        gaze,
        features,
        metrics: report,
    })
}

/// Writes `events.ndjson`, `gaze.ndjson` and `features.ndjson` into `dir`,
/// and the metrics report to `metrics_path`.
pub fn write_replay_outputs(out: &ReplayOutput, dir: &Path, metrics_path: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir)?;
    let mut ev = NdjsonWriter::create(dir.join(EVENTS_FILE))?;
    for e in &out.events {
        ev.write(e)?;
    }
    ev.finish()?;
    let mut gz = NdjsonWriter::create(dir.join(GAZE_FILE))?;
    for g in &out.gaze {
        gz.write(&GazeRecord::from(g))?;
    }
    gz.finish()?;
    let mut ft = NdjsonWriter::create(dir.join(FEATURES_FILE))?;
    for f in &out.features {
        ft.write(f)?;
    }
    ft.finish()?;
    write_json(metrics_path, &out.metrics)
}
