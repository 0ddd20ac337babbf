//! Deterministic synthetic IR eye frames with exact ground truth.
//!
//! A scene is a stack of anti-aliased disks (iris, dark pupil, bright corneal
//! glint) over a flat background, optionally occluded from the top by an
//! eyelid band and finished with seeded Gaussian noise. Every downstream
//! accuracy check in the crate measures against the parameters used here.

mod script;

pub use script::{BlinkMarker, GazeScript, SceneRamp, ScriptFrames, ScriptSegment, TargetLabel};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Frame, Point};
use crate::screen::ScreenPoint;

/// Eyelid closure at or above which a frame counts as a blink.
pub const OCCLUSION_THRESHOLD: f64 = 0.8;

/// 2x2 supersampling grid, offsets from the pixel center.
const SUBSAMPLES: [(f64, f64); 4] = [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)];

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("gaze script has no frames")]
    EmptyScript,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub width: usize,
    pub height: usize,
    pub background_intensity: u8,
    pub iris_center: Point,
    pub iris_radius: f64,
    pub iris_intensity: u8,
    pub pupil_center: Point,
    pub pupil_radius: f64,
    pub pupil_intensity: u8,
    /// Glint position relative to `pupil_center`.
    pub glint_offset: Point,
    pub glint_radius: f64,
    pub glint_intensity: u8,
    /// Optional second corneal reflection, same radius and intensity as the
    /// primary, also relative to `pupil_center`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary_glint_offset: Option<Point>,
    pub eyelid_closure: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl SyntheticScene {
    /// 64x48 reference eye: pupil at (32, 24) with radius 6, glint 3 px left
    /// and 2 px up of the pupil center.
    pub fn reference() -> Self {
        Self {
            width: 64,
            height: 48,
            background_intensity: 170,
            iris_center: Point::new(32.0, 24.0),
            iris_radius: 14.0,
            iris_intensity: 100,
            pupil_center: Point::new(32.0, 24.0),
            pupil_radius: 6.0,
            pupil_intensity: 10,
            glint_offset: Point::new(-3.0, -2.0),
            glint_radius: 1.0,
            glint_intensity: 250,
            secondary_glint_offset: None,
            eyelid_closure: 0.0,
            noise_sigma: 0.0,
            rng_seed: 0,
        }
    }

    pub fn glint_center(&self) -> Point {
        self.pupil_center + self.glint_offset
    }

    /// Ground-truth PCCR vector, pupil minus glint.
    pub fn pccr_vector(&self) -> Point {
        self.pupil_center - self.glint_center()
    }

    pub fn is_blink(&self) -> bool {
        self.eyelid_closure >= OCCLUSION_THRESHOLD
    }

    /// Shifts every feature of the eye by `delta`.
    pub fn translated(&self, delta: Point) -> Self {
        Self {
            iris_center: self.iris_center + delta,
            pupil_center: self.pupil_center + delta,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidScene(msg));
        if self.width < 16 || self.height < 16 {
            return bad(format!(
                "frame must be at least 16x16, got {}x{}",
                self.width, self.height
            ));
        }
        for (name, r) in [
            ("iris", self.iris_radius),
            ("pupil", self.pupil_radius),
            ("glint", self.glint_radius),
        ] {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("{name} radius must be positive, got {r}"));
            }
        }
        let inside = |p: Point| {
            p.x.is_finite()
                && p.y.is_finite()
                && p.x >= 0.0
                && p.y >= 0.0
                && p.x <= (self.width - 1) as f64
                && p.y <= (self.height - 1) as f64
        };
        for (name, p) in [
            ("iris", self.iris_center),
            ("pupil", self.pupil_center),
            ("glint", self.glint_center()),
        ] {
            if !inside(p) {
                return bad(format!("{name} center ({}, {}) outside frame", p.x, p.y));
            }
        }
        if !(self.pupil_intensity < self.iris_intensity
            && self.iris_intensity < self.glint_intensity)
        {
            return bad("intensities must satisfy pupil < iris < glint".into());
        }
        if !(0.0..=1.0).contains(&self.eyelid_closure) {
            return bad(format!(
                "eyelid closure {} outside [0, 1]",
                self.eyelid_closure
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise sigma {} must be >= 0", self.noise_sigma));
        }
        // Full closure has to hide every feature, so all of them must sit
        // inside the iris disk the eyelid sweeps over.
        let slack = 1e-9;
        if self.pupil_center.distance(self.iris_center) + self.pupil_radius
            > self.iris_radius + slack
        {
            return bad("pupil disk must lie inside the iris".into());
        }
        let glints = std::iter::once(self.glint_offset).chain(self.secondary_glint_offset);
        for offset in glints {
            let c = self.pupil_center + offset;
            if c.distance(self.iris_center) + self.glint_radius > self.iris_radius + slack {
                return bad("glint disk must lie inside the iris".into());
            }
        }
        Ok(())
    }
}

/// Renders `scene` into a frame. Identical scenes give bit-identical frames.
pub fn render_eye_frame(scene: &SyntheticScene) -> Result<Frame, SynthError> {
    scene.validate()?;

    let iris_r2 = scene.iris_radius * scene.iris_radius;
    let pupil_r2 = scene.pupil_radius * scene.pupil_radius;
    let glint_r2 = scene.glint_radius * scene.glint_radius;
    let glints: Vec<Point> = std::iter::once(scene.glint_center())
        .chain(
            scene
                .secondary_glint_offset
                .map(|o| scene.pupil_center + o),
        )
        .collect();
    let lid_line = scene.iris_center.y - scene.iris_radius
        + scene.eyelid_closure * 2.0 * scene.iris_radius;

    let bg = f64::from(scene.background_intensity);
    let iris = f64::from(scene.iris_intensity);
    let pupil = f64::from(scene.pupil_intensity);
    let glint = f64::from(scene.glint_intensity);

    let within = |c: Point, r2: f64, x: f64, y: f64| {
        let dx = x - c.x;
        let dy = y - c.y;
        dx * dx + dy * dy <= r2
    };
    let sample = |x: f64, y: f64| -> f64 {
        if y < lid_line {
            bg
        } else if glints.iter().any(|&g| within(g, glint_r2, x, y)) {
            glint
        } else if within(scene.pupil_center, pupil_r2, x, y) {
            pupil
        } else if within(scene.iris_center, iris_r2, x, y) {
            iris
        } else {
            bg
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
    let noise = if scene.noise_sigma > 0.0 {
        Some(Normal::new(0.0, scene.noise_sigma).expect("validated sigma"))
    } else {
        None
    };

    // Everything outside this box is plain background before noise.
    let reach = scene.iris_radius + 1.0;
    let x_lo = (scene.iris_center.x - reach).floor().max(0.0) as usize;
    let x_hi = ((scene.iris_center.x + reach).ceil() as usize).min(scene.width - 1);
    let y_lo = (scene.iris_center.y - reach).floor().max(0.0) as usize;
    let y_hi = ((scene.iris_center.y + reach).ceil() as usize).min(scene.height - 1);

    let mut pixels = Vec::with_capacity(scene.width * scene.height);
    for y in 0..scene.height {
        for x in 0..scene.width {
            let mean = if (x_lo..=x_hi).contains(&x) && (y_lo..=y_hi).contains(&y) {
                let (fx, fy) = (x as f64, y as f64);
                SUBSAMPLES
                    .iter()
                    .map(|&(sx, sy)| sample(fx + sx, fy + sy))
                    .sum::<f64>()
                    / SUBSAMPLES.len() as f64
            } else {
                bg
            };
            let value = match &noise {
                Some(n) => mean + n.sample(&mut rng),
                None => mean,
            };
            pixels.push(value.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(Frame::new(scene.width, scene.height, pixels).expect("dimensions validated"))
}

/// Per-frame truth labels emitted alongside rendered frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frame_index: usize,
    /// Pupil minus glint, image pixels.
    pub pccr_vector: Point,
    pub screen_target: Option<ScreenPoint>,
    pub blink: bool,
}

/// Runs a script to completion, collecting every frame and its truth label.
pub fn run_script(script: &GazeScript) -> Result<(Vec<Frame>, Vec<GroundTruth>), SynthError> {
    let mut frames = Vec::with_capacity(script.frame_count());
    let mut truths = Vec::with_capacity(script.frame_count());
    for item in script.frames()? {
        let (frame, truth) = item?;
        frames.push(frame);
        truths.push(truth);
    }
    Ok((frames, truths))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_scene_pixels() {
        let f = render_eye_frame(&SyntheticScene::reference()).unwrap();
        assert_eq!(f.get(32, 24), 10);
        assert_eq!(f.get(29, 22), 250);
        assert_eq!(f.get(0, 0), 170);
    }

    #[test]
    fn dark_background_scene() {
        let scene = SyntheticScene {
            background_intensity: 40,
            ..SyntheticScene::reference()
        };
        let f = render_eye_frame(&scene).unwrap();
        assert_eq!(f.get(32, 24), 10);
        assert_eq!(f.get(29, 22), 250);
        let closed = render_eye_frame(&SyntheticScene {
            eyelid_closure: 1.0,
            ..scene
        })
        .unwrap();
        assert!(closed.pixels().iter().all(|&p| p < 200));
    }

    #[test]
    fn full_closure_hides_glint() {
        let scene = SyntheticScene {
            eyelid_closure: 1.0,
            ..SyntheticScene::reference()
        };
        let f = render_eye_frame(&scene).unwrap();
        assert!(f.pixels().iter().all(|&p| p < 200));
        assert!(f.pixels().iter().all(|&p| p == 170));
    }

    #[test]
    fn rendering_is_deterministic() {
        let scene = SyntheticScene {
            noise_sigma: 6.0,
            rng_seed: 99,
            ..SyntheticScene::reference()
        };
        let a = render_eye_frame(&scene).unwrap();
        let b = render_eye_frame(&scene).unwrap();
        assert_eq!(a.pixels(), b.pixels());
        let c = render_eye_frame(&SyntheticScene {
            rng_seed: 100,
            ..scene
        })
        .unwrap();
        assert_ne!(a.pixels(), c.pixels());
    }

    #[test]
    fn invalid_scenes_are_rejected() {
        let base = SyntheticScene::reference();
        let cases = [
            SyntheticScene {
                width: 15,
                ..base.clone()
            },
            SyntheticScene {
                pupil_radius: 0.0,
                ..base.clone()
            },
            SyntheticScene {
                iris_center: Point::new(80.0, 24.0),
                ..base.clone()
            },
            SyntheticScene {
                pupil_intensity: 120,
                ..base.clone()
            },
            SyntheticScene {
                eyelid_closure: 1.5,
                ..base.clone()
            },
            SyntheticScene {
                glint_offset: Point::new(14.0, 0.0),
                ..base.clone()
            },
        ];
        for scene in cases {
            assert!(
                matches!(render_eye_frame(&scene), Err(SynthError::InvalidScene(_))),
                "{scene:?}"
            );
        }
    }

    #[test]
    fn pccr_vector_is_negated_offset() {
        let s = SyntheticScene::reference();
        assert_eq!(s.pccr_vector(), Point::new(3.0, 2.0));
    }
}
