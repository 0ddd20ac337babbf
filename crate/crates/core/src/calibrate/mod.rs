//! Mapping PCCR vectors to screen coordinates.
//!
//! The closed-form path fits `x = a0 + a1*du + a2*dv + a3*du*dv` (and the
//! same family for `y`) by ordinary least squares from the five-point
//! calibration capture. [`regressor`] learns the same mapping from an
//! augmented feature dataset.

pub mod regressor;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::GazeVector;
use crate::screen::{ScreenPoint, ScreenSize};

pub use regressor::{
    fit_regressor, FeatureRecipe, FeatureVector, LearnedRegressor, MlpConfig, MlpParams,
    RegressorError, RegressorModel,
    RegressorVariant,
};

/// Corner targets sit this fraction of the screen in from each edge.
pub const CORNER_INSET: f64 = 0.1;

/// Default number of frames whose median vector represents one target.
pub const DEFAULT_DWELL_WINDOW: usize = 30;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("need at least 4 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("calibration vectors are degenerate (design rank {rank} < 4)")]
    DegenerateCalibration { rank: usize },
    #[error("screen must be at least 64x64, got {w}x{h}")]
    ScreenTooSmall { w: u32, h: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub vector: GazeVector,
    pub target: ScreenPoint,
}

/// The five targets in order: top left, top right, bottom left, bottom right
/// and center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets(pub [ScreenPoint; 5]);

impl CalibrationTargets {
    pub fn points(&self) -> &[ScreenPoint; 5] {
        &self.0
    }
}

pub fn default_targets(screen: ScreenSize) -> Result<CalibrationTargets, CalibrationError> {
    if screen.w < 64 || screen.h < 64 {
        return Err(CalibrationError::ScreenTooSmall {
            w: screen.w,
            h: screen.h,
        });
    }
    let (w, h) = (f64::from(screen.w), f64::from(screen.h));
    let lo = CORNER_INSET;
    let hi = 1.0 - CORNER_INSET;
    let at = |fx: f64, fy: f64| ScreenPoint::new(fx * w, fy * h);
    Ok(CalibrationTargets([
        at(lo, lo),
        at(hi, lo),
        at(lo, hi),
        at(hi, hi),
        at(0.5, 0.5),
    ]))
}

/// Per-axis affine-plus-cross-term model. Serializes as
/// `{"w","h","x":[a0..a3],"y":[b0..b3],"rms"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub w: u32,
    pub h: u32,
    pub x: [f64; 4],
    pub y: [f64; 4],
    pub rms: f64,
}

fn basis(v: GazeVector) -> [f64; 4] {
    [1.0, v.du, v.dv, v.du * v.dv]
}

impl CalibrationModel {
    pub fn screen(&self) -> ScreenSize {
        ScreenSize::new(self.w, self.h)
    }

    /// Evaluates both axes without clamping.
    pub fn evaluate(&self, v: GazeVector) -> ScreenPoint {
        let b = basis(v);
        let dot = |c: &[f64; 4]| c.iter().zip(&b).map(|(c, b)| c * b).sum::<f64>();
        ScreenPoint::new(dot(&self.x), dot(&self.y))
    }

    pub fn sum_squared_residuals(&self, samples: &[CalibrationSample]) -> f64 {
        samples
            .iter()
            .map(|s| {
                let p = self.evaluate(s.vector);
                (p.x - s.target.x).powi(2) + (p.y - s.target.y).powi(2)
            })
            .sum()
    }
}

/// Ordinary least squares per axis over the design `[1, du, dv, du*dv]`.
pub fn fit_affine_cross(
    samples: &[CalibrationSample],
    screen: ScreenSize,
) -> Result<CalibrationModel, CalibrationError> {
    if samples.len() < 4 {
        return Err(CalibrationError::InsufficientSamples(samples.len()));
    }
    let n = samples.len();
    // Column scaling keeps the rank test meaningful when vectors are large.
    let raw = DMatrix::from_fn(n, 4, |i, j| basis(samples[i].vector)[j]);
    let scales: Vec<f64> = (0..4)
        .map(|j| {
            let m = raw.column(j).amax();
            if m > 0.0 {
                m
            } else {
                1.0
            }
        })
        .collect();
    let design = DMatrix::from_fn(n, 4, |i, j| raw[(i, j)] / scales[j]);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > smax * 1e-10)
        .count();
    if rank < 4 {
        return Err(CalibrationError::DegenerateCalibration { rank });
    }
    let solve = |rhs: DVector<f64>| -> [f64; 4] {
        let c = svd.solve(&rhs, 0.0).expect("u and v were computed");
        [
            c[0] / scales[0],
            c[1] / scales[1],
            c[2] / scales[2],
            c[3] / scales[3],
        ]
    };
    let x = solve(DVector::from_iterator(n, samples.iter().map(|s| s.target.x)));
    let y = solve(DVector::from_iterator(n, samples.iter().map(|s| s.target.y)));
    let mut model = CalibrationModel {
        w: screen.w,
        h: screen.h,
        x,
        y,
        rms: 0.0,
    };
    model.rms = (model.sum_squared_residuals(samples) / n as f64).sqrt();
    Ok(model)
}

/// Evaluates the model and clamps into the screen.
pub fn map_gaze(model: &CalibrationModel, v: GazeVector) -> ScreenPoint {
    model.screen().clamp(model.evaluate(v))
}

/// Component-wise median of the last `window` vectors, skipping frames where
/// no vector was measured (blinks, dropouts).
pub fn aggregate_dwell(vectors: &[Option<GazeVector>], window: usize) -> Option<GazeVector> {
    let valid: Vec<GazeVector> = vectors.iter().flatten().copied().collect();
    let tail = &valid[valid.len().saturating_sub(window.max(1))..];
    if tail.is_empty() {
        return None;
    }
    let med = |mut xs: Vec<f64>| {
        xs.sort_by(f64::total_cmp);
        let m = xs.len() / 2;
        if xs.len().is_multiple_of(2) {
            (xs[m - 1] + xs[m]) / 2.0
        } else {
            xs[m]
        }
    };
    Some(GazeVector::new(
        med(tail.iter().map(|v| v.du).collect()),
        med(tail.iter().map(|v| v.dv).collect()),
    ))
}
