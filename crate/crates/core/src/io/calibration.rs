//! Calibration from a generated dataset: detect, aggregate per target, fit.

use crate::calibrate::{
    aggregate_dwell, fit_affine_cross, fit_regressor, CalibrationModel, CalibrationSample,
    FeatureRecipe, FeatureVector, LearnedRegressor, RegressorVariant,
};
use crate::detect::{extract_features, DetectorConfig, GazeVector};
use crate::screen::ScreenPoint;

use super::container::ContainerReader;
use super::dataset::Dataset;
use super::sidecar::{read_ndjson, TruthRecord};
use super::IoError;

/// Shortest run of identically labeled frames accepted as a target dwell.
pub const MIN_TARGET_RUN: usize = 10;

/// One aggregated sample per dwell run inside the dataset's calibration
/// segments.
pub fn collect_calibration_samples(
    ds: &Dataset,
    detector: &DetectorConfig,
    dwell_window: usize,
) -> Result<Vec<CalibrationSample>, IoError> {
    let truth = ds.truth()?;
    let ranges: Vec<(u64, u64)> = ds.segments_of("calibration").map(|s| (s.first, s.last)).collect();
    let mut samples = Vec::new();
    let mut run: Option<(ScreenPoint, Vec<Option<GazeVector>>)> = None;
    let close = |run: Option<(ScreenPoint, Vec<Option<GazeVector>>)>, samples: &mut Vec<CalibrationSample>| {
        if let Some((target, vs)) = run {
            if vs.len() >= MIN_TARGET_RUN {
                if let Some(v) = aggregate_dwell(&vs, dwell_window) {
                    samples.push(CalibrationSample { vector: v, target });
                }
            }
        }
    };
    for (frame, rec) in ds.frames()?.zip(&truth) {
        let frame = frame?;
        let in_cal = ranges.iter().any(|&(a, b)| (a..=b).contains(&rec.i));
        let target = rec.target().filter(|_| in_cal);
        match (target, &mut run) {
            (Some(t), Some((cur, vs))) if *cur == t => {
                vs.push(extract_features(&frame, detector).vector);
            }
            (Some(t), _) => {
                close(run.take(), &mut samples);
                run = Some((t, vec![extract_features(&frame, detector).vector]));
            }
            (None, _) => close(run.take(), &mut samples),
        }
    }
    close(run, &mut samples);
    Ok(samples)
}

/// The calibrate command: samples, then the closed-form fit.
pub fn calibrate_dataset(
    ds: &Dataset,
    detector: &DetectorConfig,
    dwell_window: usize,
) -> Result<(CalibrationModel, Vec<CalibrationSample>), IoError> {
    let samples = collect_calibration_samples(ds, detector, dwell_window)?;
    let model =
        fit_affine_cross(&samples, ds.manifest.screen).map_err(|e| IoError::Degenerate(e.to_string()))?;
    Ok((model, samples))
}

pub struct RegressorTraining {
    pub model: LearnedRegressor,
    pub samples: usize,
    pub augmented: usize,
}

fn features_of(
    frames: impl Iterator<Item = Result<crate::frame::Frame, super::container::ContainerError>>,
    truth: &[TruthRecord],
    keep: impl Fn(&TruthRecord) -> bool,
    detector: &DetectorConfig,
    recipe: FeatureRecipe,
) -> Result<Vec<(FeatureVector, ScreenPoint)>, IoError> {
    let mut out = Vec::new();
    for (frame, rec) in frames.zip(truth) {
        let frame = frame?;
        let Some(target) = rec.target().filter(|_| keep(rec)) else {
            continue;
        };
        let f = extract_features(&frame, detector);
        if let Some(v) = f.vector {
            let fv = recipe
                .features(v, f.pupil.map(|p| p.radius))
                .map_err(|e| IoError::Format(e.to_string()))?;
            out.push((fv, target));
        }
    }
    Ok(out)
}

/// Fits the learned regressor on calibration dwell frames plus any
/// augmented copies recorded in the manifest.
pub fn train_regressor(
    ds: &Dataset,
    detector: &DetectorConfig,
    recipe: FeatureRecipe,
    lambda: f64,
    variant: RegressorVariant,
) -> Result<RegressorTraining, IoError> {
    let truth = ds.truth()?;
    let ranges: Vec<(u64, u64)> = ds.segments_of("calibration").map(|s| (s.first, s.last)).collect();
    let mut data = features_of(
        ds.frames()?,
        &truth,
        |r| ranges.iter().any(|&(a, b)| (a..=b).contains(&r.i)),
        detector,
        recipe,
    )?;
    let raw = data.len();
    if let Some(aug) = &ds.manifest.augmented {
        let atruth: Vec<TruthRecord> = read_ndjson(ds.dir.join(&aug.truth))?;
        let frames = ContainerReader::open(ds.dir.join(&aug.frames))?;
        data.extend(features_of(frames, &atruth, |_| true, detector, recipe)?);
    }
    let model = fit_regressor(&data, lambda, variant, ds.manifest.screen)
        .map_err(|e| IoError::Degenerate(e.to_string()))?;
    Ok(RegressorTraining {
        model,
        samples: data.len(),
        augmented: data.len() - raw,
    })
}
