//! Per-frame eye measurement: pupil center, corneal glint, their PCCR
//! displacement, and the "no reflection means blink" rule.

mod components;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{BinaryMask, Frame, Point};
use crate::preprocess::{binary_threshold, Polarity};
use components::{label, median, quantile, Component, LocalRegion};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DetectError {
    #[error("no dark component large enough to be a pupil")]
    NoPupil,
    #[error("no bright component small enough to be a glint")]
    NoGlint,
    #[error("pupil threshold {pupil} must be below glint threshold {glint}")]
    InvalidConfig { pupil: u8, glint: u8 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub pupil_threshold: u8,
    pub glint_threshold: u8,
    /// Largest glint blob accepted, px².
    pub max_glint_area: usize,
    /// Smallest pupil blob accepted, px².
    pub min_pupil_area: usize,
    /// Glint blobs whose peaks are within this many levels of the brightest
    /// one are treated as tied and resolved by proximity to the hint.
    pub glint_peak_tolerance: u8,
    /// Follow the coverage centroid with the gradient-alignment pass.
    pub gradient_refinement: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            pupil_threshold: 64,
            glint_threshold: 200,
            max_glint_area: 64,
            min_pupil_area: 9,
            glint_peak_tolerance: 8,
            gradient_refinement: false,
        }
    }
}

impl DetectorConfig {
    /// Defaults for an eye image `k` times the reference size in each
    /// dimension: area limits grow with `k²`.
    pub fn scaled(k: f64) -> Self {
        let d = Self::default();
        let area = |a: usize| ((a as f64) * k * k).round().max(1.0) as usize;
        Self {
            max_glint_area: area(d.max_glint_area),
            min_pupil_area: area(d.min_pupil_area),
            ..d
        }
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        if self.pupil_threshold >= self.glint_threshold {
            return Err(DetectError::InvalidConfig {
                pupil: self.pupil_threshold,
                glint: self.glint_threshold,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PupilEstimate {
    pub center: Point,
    pub radius: f64,
    /// Fraction of pixels inside the fitted disk that are below threshold.
    pub confidence: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlintEstimate {
    pub center: Point,
    pub peak_intensity: u8,
    pub area: usize,
}

/// Pupil center minus glint center, eye-image pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GazeVector {
    pub du: f64,
    pub dv: f64,
}

impl GazeVector {
    pub const fn new(du: f64, dv: f64) -> Self {
        Self { du, dv }
    }
}

impl From<Point> for GazeVector {
    fn from(p: Point) -> Self {
        Self::new(p.x, p.y)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EyeFeatures {
    pub pupil: Option<PupilEstimate>,
    pub glint: Option<GlintEstimate>,
    pub vector: Option<GazeVector>,
    pub blink_observation: bool,
}

/// Largest dark blob, centered by partial-coverage weighting. With
/// `gradient_refinement` the center is then moved to the least-squares
/// intersection of the boundary gradient lines (one pass, at most 1 px).
pub fn locate_pupil(frame: &Frame, cfg: &DetectorConfig) -> Result<PupilEstimate, DetectError> {
    let mask = binary_threshold(frame, cfg.pupil_threshold, Polarity::KeepBelow);
    let comp = label(&mask)
        .into_iter()
        .filter(|c| c.area() >= cfg.min_pupil_area)
        .max_by(|a, b| a.area().cmp(&b.area()).then(b.pixels[0].cmp(&a.pixels[0])))
        .ok_or(DetectError::NoPupil)?;

    let region = LocalRegion::new(frame, &comp, 5);
    let coarse = coverage_centroid(frame, &comp, &region);
    let center = if cfg.gradient_refinement {
        refine_by_gradients(frame, &region, cfg, coarse)
    } else {
        coarse
    };
    let area = region.filled.count() as f64;
    let radius = (area / std::f64::consts::PI).sqrt();

    Ok(PupilEstimate {
        center,
        radius,
        confidence: disk_fill_fraction(&mask, center, radius),
    })
}

/// Centroid weighted by each pixel's estimated pupil coverage, interpolated
/// between the blob's own level and the level of a ring just outside it.
/// Enclosed holes (a glint sitting on the pupil) count as fully covered.
fn coverage_centroid(frame: &Frame, comp: &Component, region: &LocalRegion) -> Point {
    let mut inner: Vec<u8> = comp.pixels.iter().map(|&i| frame.pixels()[i]).collect();
    let near = LocalRegion::dilated(&region.filled, 2);
    let far = LocalRegion::dilated(&region.filled, 4);
    let ring = BinaryMask::from_fn(far.width(), far.height(), |x, y| {
        far.get(x, y) && !near.get(x, y)
    });
    let dark = median(&mut inner).expect("component is non-empty");
    let bright = median(&mut region.values(frame, &ring));

    let mut sum = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut accumulate = |x: usize, y: usize, wgt: f64| {
        sum += wgt;
        sx += wgt * (x + region.ox) as f64;
        sy += wgt * (y + region.oy) as f64;
    };
    match bright {
        Some(bright) if bright - dark >= 1.0 => {
            for (x, y) in near.iter_set() {
                let c = if region.holes.get(x, y) {
                    1.0
                } else {
                    let p = f64::from(frame.get(x + region.ox, y + region.oy));
                    ((bright - p) / (bright - dark)).clamp(0.0, 1.0)
                };
                if c > 0.0 {
                    accumulate(x, y, c);
                }
            }
        }
        _ => {
            for (x, y) in region.filled.iter_set() {
                accumulate(x, y, 1.0);
            }
        }
    }
    Point::new(sx / sum, sy / sum)
}

const REFINE_RADIUS: f64 = 1.0;

/// Moves `start` to the point best aligned with the normalized image
/// gradients on the blob boundary. Gradients touching the glint or an
/// enclosed hole are skipped.
fn refine_by_gradients(
    frame: &Frame,
    region: &LocalRegion,
    cfg: &DetectorConfig,
    start: Point,
) -> Point {
    let (fw, fh) = (frame.width(), frame.height());
    let grow = LocalRegion::dilated(&region.filled, 2);
    let holes = LocalRegion::dilated(&region.holes, 2);
    let mut samples: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut mags = Vec::new();
    for (lx, ly) in grow.iter_set() {
        let (x, y) = (lx + region.ox, ly + region.oy);
        if x == 0 || y == 0 || x + 1 >= fw || y + 1 >= fh || holes.get(lx, ly) {
            continue;
        }
        let near_glint = (y - 1..=y + 1)
            .any(|yy| (x - 1..=x + 1).any(|xx| frame.get(xx, yy) >= cfg.glint_threshold));
        if near_glint {
            continue;
        }
        let gx = (f64::from(frame.get(x + 1, y)) - f64::from(frame.get(x - 1, y))) / 2.0;
        let gy = (f64::from(frame.get(x, y + 1)) - f64::from(frame.get(x, y - 1))) / 2.0;
        let m = gx.hypot(gy);
        mags.push(m);
        samples.push((x as f64, y as f64, gx, gy));
    }
    if samples.len() < 8 {
        return start;
    }
    let n = mags.len() as f64;
    let mean = mags.iter().sum::<f64>() / n;
    let std = (mags.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n).sqrt();
    let cut = mean + 0.3 * std;
    let edges: Vec<(f64, f64, f64, f64, f64)> = samples
        .into_iter()
        .zip(mags)
        .filter(|&(_, m)| m > cut && m > 0.0)
        .map(|((x, y, gx, gy), m)| (x, y, gx / m, gy / m, m))
        .collect();
    if edges.len() < 8 {
        return start;
    }

    // Each boundary gradient defines a line through its pixel; the center is
    // their weighted least-squares intersection.
    let mut a = [[0.0f64; 2]; 2];
    let mut b = [0.0f64; 2];
    for &(x, y, gx, gy, m) in &edges {
        let d = (x - start.x).hypot(y - start.y);
        if d < 1.0 {
            continue;
        }
        let (nx, ny) = (gy, -gx);
        let w = m / (d * d);
        let rhs = nx * x + ny * y;
        a[0][0] += w * nx * nx;
        a[0][1] += w * nx * ny;
        a[1][1] += w * ny * ny;
        b[0] += w * nx * rhs;
        b[1] += w * ny * rhs;
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[0][1];
    let trace = a[0][0] + a[1][1];
    if !(det > 1e-6 * trace * trace) {
        return start;
    }
    let cx = (a[1][1] * b[0] - a[0][1] * b[1]) / det;
    let cy = (a[0][0] * b[1] - a[0][1] * b[0]) / det;
    let c = Point::new(cx, cy);
    if c.distance(start) > REFINE_RADIUS {
        start
    } else {
        c
    }
}

fn disk_fill_fraction(mask: &BinaryMask, center: Point, radius: f64) -> f64 {
    let r2 = radius * radius;
    let x_lo = (center.x - radius).floor().max(0.0) as usize;
    let y_lo = (center.y - radius).floor().max(0.0) as usize;
    let x_hi = ((center.x + radius).ceil().max(0.0) as usize).min(mask.width() - 1);
    let y_hi = ((center.y + radius).ceil().max(0.0) as usize).min(mask.height() - 1);
    let mut inside = 0usize;
    let mut dark = 0usize;
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let dx = x as f64 - center.x;
            let dy = y as f64 - center.y;
            if dx * dx + dy * dy <= r2 {
                inside += 1;
                dark += usize::from(mask.get(x, y));
            }
        }
    }
    if inside == 0 {
        0.0
    } else {
        dark as f64 / inside as f64
    }
}

/// Brightest small blob, ties resolved by distance to `pupil_hint` (or the
/// frame center), centered by background-subtracted intensity weighting.
pub fn locate_glint(
    frame: &Frame,
    cfg: &DetectorConfig,
    pupil_hint: Option<Point>,
) -> Result<GlintEstimate, DetectError> {
    let mask = binary_threshold(frame, cfg.glint_threshold, Polarity::KeepAbove);
    let candidates: Vec<(Component, u8)> = label(&mask)
        .into_iter()
        .filter(|c| c.area() <= cfg.max_glint_area)
        .map(|c| {
            let peak = c.pixels.iter().map(|&i| frame.pixels()[i]).max().unwrap_or(0);
            (c, peak)
        })
        .collect();
    let top = candidates
        .iter()
        .map(|(_, p)| *p)
        .max()
        .ok_or(DetectError::NoGlint)?;
    let hint = pupil_hint.unwrap_or(Point::new(
        (frame.width() as f64 - 1.0) / 2.0,
        (frame.height() as f64 - 1.0) / 2.0,
    ));

    let mut best: Option<(f64, GlintEstimate)> = None;
    for (comp, peak) in &candidates {
        if *peak < top.saturating_sub(cfg.glint_peak_tolerance) {
            continue;
        }
        let center = glint_centroid(frame, comp);
        let d = center.distance(hint);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((
                d,
                GlintEstimate {
                    center,
                    peak_intensity: *peak,
                    area: comp.area(),
                },
            ));
        }
    }
    Ok(best.expect("at least one candidate at the top peak").1)
}

fn glint_centroid(frame: &Frame, comp: &Component) -> Point {
    let region = LocalRegion::new(frame, comp, 4);
    let near = LocalRegion::dilated(&region.filled, 1);
    let far = LocalRegion::dilated(&region.filled, 3);
    let ring = BinaryMask::from_fn(far.width(), far.height(), |x, y| {
        far.get(x, y) && !near.get(x, y)
    });
    let base = quantile(&mut region.values(frame, &ring), 0.75).unwrap_or(0.0);
    let mut sum = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (x, y) in near.iter_set() {
        let (gx, gy) = (x + region.ox, y + region.oy);
        let wgt = (f64::from(frame.get(gx, gy)) - base).max(0.0);
        sum += wgt;
        sx += wgt * gx as f64;
        sy += wgt * gy as f64;
    }
    if sum <= 0.0 {
        let n = comp.area() as f64;
        let (cx, cy) = comp.pixels.iter().fold((0.0, 0.0), |(ax, ay), &i| {
            (ax + (i % frame.width()) as f64, ay + (i / frame.width()) as f64)
        });
        return Point::new(cx / n, cy / n);
    }
    Point::new(sx / sum, sy / sum)
}

pub fn pccr_vector(pupil: &PupilEstimate, glint: &GlintEstimate) -> GazeVector {
    GazeVector::new(
        pupil.center.x - glint.center.x,
        pupil.center.y - glint.center.y,
    )
}

/// Full per-frame measurement. A frame without a glint is a blink
/// observation; absence of either feature is encoded, never raised.
pub fn extract_features(frame: &Frame, cfg: &DetectorConfig) -> EyeFeatures {
    let pupil = locate_pupil(frame, cfg).ok();
    let glint = locate_glint(frame, cfg, pupil.map(|p| p.center)).ok();
    let vector = match (&pupil, &glint) {
        (Some(p), Some(g)) => Some(pccr_vector(p, g)),
        _ => None,
    };
    EyeFeatures {
        pupil,
        glint,
        vector,
        blink_observation: glint.is_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{render_eye_frame, SyntheticScene};

    fn reference_frame() -> Frame {
        render_eye_frame(&SyntheticScene::reference()).unwrap()
    }

    #[test]
    fn pupil_on_reference_scene() {
        let p = locate_pupil(&reference_frame(), &DetectorConfig::default()).unwrap();
        assert!(p.center.distance(Point::new(32.0, 24.0)) < 0.5, "{p:?}");
        assert!((p.radius - 6.0).abs() < 0.5);
        assert!(p.confidence > 0.8 && p.confidence <= 1.0);
    }

    #[test]
    fn uniform_frame_has_no_pupil_or_glint() {
        let f = Frame::filled(64, 48, 128);
        let cfg = DetectorConfig::default();
        assert_eq!(locate_pupil(&f, &cfg), Err(DetectError::NoPupil));
        assert_eq!(locate_glint(&f, &cfg, None), Err(DetectError::NoGlint));
        let feats = extract_features(&f, &cfg);
        assert!(feats.pupil.is_none() && feats.glint.is_none() && feats.vector.is_none());
        assert!(feats.blink_observation);
    }

    #[test]
    fn glint_on_reference_scene() {
        let g = locate_glint(&reference_frame(), &DetectorConfig::default(), None).unwrap();
        assert!(g.center.distance(Point::new(29.0, 22.0)) < 0.5, "{g:?}");
        assert_eq!(g.peak_intensity, 250);
    }

    #[test]
    fn closed_eye_is_a_blink() {
        let scene = SyntheticScene {
            eyelid_closure: 1.0,
            ..SyntheticScene::reference()
        };
        let f = render_eye_frame(&scene).unwrap();
        let cfg = DetectorConfig::default();
        assert_eq!(locate_glint(&f, &cfg, None), Err(DetectError::NoGlint));
        let feats = extract_features(&f, &cfg);
        assert!(feats.blink_observation);
        assert!(feats.vector.is_none());
    }

    #[test]
    fn pccr_definition() {
        let p = PupilEstimate {
            center: Point::new(32.0, 24.0),
            radius: 6.0,
            confidence: 1.0,
        };
        let g = GlintEstimate {
            center: Point::new(29.0, 22.0),
            peak_intensity: 250,
            area: 4,
        };
        assert_eq!(pccr_vector(&p, &g), GazeVector::new(3.0, 2.0));
        let same = GlintEstimate {
            center: p.center,
            ..g
        };
        assert_eq!(pccr_vector(&p, &same), GazeVector::new(0.0, 0.0));
    }

    #[test]
    fn rendered_vector_matches_negated_offset() {
        let feats = extract_features(&reference_frame(), &DetectorConfig::default());
        let v = feats.vector.unwrap();
        assert!((v.du - 3.0).hypot(v.dv - 2.0) < 0.7, "{v:?}");
        assert!(!feats.blink_observation);
    }

    #[test]
    fn nearer_of_two_equal_glints_wins() {
        let scene = SyntheticScene {
            glint_offset: Point::new(-3.0, -2.0),
            secondary_glint_offset: Some(Point::new(5.0, 6.0)),
            ..SyntheticScene::reference()
        };
        let f = render_eye_frame(&scene).unwrap();
        let cfg = DetectorConfig::default();
        let g = locate_glint(&f, &cfg, Some(scene.pupil_center)).unwrap();
        assert!(g.center.distance(Point::new(29.0, 22.0)) < 0.5, "{g:?}");
    }

    #[test]
    fn config_validation() {
        let cfg = DetectorConfig {
            pupil_threshold: 200,
            ..DetectorConfig::default()
        };
        assert!(cfg.validate().is_err());
        DetectorConfig::default().validate().unwrap();
    }

    #[test]
    fn gradient_refinement_stays_near_truth() {
        let scene = SyntheticScene {
            glint_offset: Point::new(0.0, 9.0),
            ..SyntheticScene::reference()
        };
        let f = render_eye_frame(&scene).unwrap();
        let cfg = DetectorConfig {
            gradient_refinement: true,
            ..DetectorConfig::default()
        };
        let p = locate_pupil(&f, &cfg).unwrap();
        assert!(p.center.distance(scene.pupil_center) < 0.05, "{p:?}");
    }
}
