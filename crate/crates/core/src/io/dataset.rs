//! Scripted dataset generation: config, frame/truth writing and the manifest
//! that ties them together.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::container::{ContainerReader, ContainerWriter};
use super::sidecar::{read_ndjson, NdjsonWriter, TruthRecord};
use super::IoError;
use crate::calibrate::default_targets;
use crate::frame::{Frame, Point};
use crate::preprocess::{augment, AugmentSpec};
use crate::screen::{ScreenPoint, ScreenSize};
use crate::synth::{BlinkMarker, GazeScript, ScriptSegment, SyntheticScene, TargetLabel};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FRAMES_FILE: &str = "frames.eys";
pub const TRUTH_FILE: &str = "truth.ndjson";
pub const AUGMENTED_FRAMES_FILE: &str = "augmented.eys";
pub const AUGMENTED_TRUTH_FILE: &str = "augmented.ndjson";

/// Eye image model. The eye sits at the frame center; a gaze vector `v`
/// moves pupil and iris by `pupil_shift * v` and places the glint at
/// `-v` from the pupil center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EyeGeometry {
    pub width: usize,
    pub height: usize,
    pub background: u8,
    pub iris_radius: f64,
    pub iris_intensity: u8,
    pub pupil_radius: f64,
    pub pupil_intensity: u8,
    pub glint_radius: f64,
    pub glint_intensity: u8,
    pub pupil_shift: f64,
}

impl Default for EyeGeometry {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            background: 170,
            iris_radius: 30.0,
            iris_intensity: 100,
            pupil_radius: 12.0,
            pupil_intensity: 15,
            glint_radius: 2.0,
            glint_intensity: 245,
            pupil_shift: 0.5,
        }
    }
}

impl EyeGeometry {
    /// Same eye with every length multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            width: (self.width as f64 * k).round() as usize,
            height: (self.height as f64 * k).round() as usize,
            iris_radius: self.iris_radius * k,
            pupil_radius: self.pupil_radius * k,
            glint_radius: self.glint_radius * k,
            ..*self
        }
    }

    pub fn scene(&self, v: Point, noise_sigma: f64, seed: u64) -> SyntheticScene {
        let c = Point::new(self.width as f64 / 2.0, self.height as f64 / 2.0) + v * self.pupil_shift;
        SyntheticScene {
            width: self.width,
            height: self.height,
            background_intensity: self.background,
            iris_center: c,
            iris_radius: self.iris_radius,
            iris_intensity: self.iris_intensity,
            pupil_center: c,
            pupil_radius: self.pupil_radius,
            pupil_intensity: self.pupil_intensity,
            glint_offset: v * -1.0,
            glint_radius: self.glint_radius,
            glint_intensity: self.glint_intensity,
            secondary_glint_offset: None,
            eyelid_closure: 0.0,
            noise_sigma,
            rng_seed: seed,
        }
    }
}

/// Ground-truth screen position as a function of the PCCR vector, in the
/// same family the calibration fits: `x = a0 + a1 du + a2 dv + a3 du dv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthMapping {
    pub x: [f64; 4],
    pub y: [f64; 4],
}

impl TruthMapping {
    /// Affine map from `|du| <= 5.4`, `|dv| <= 4.8` (in eye pixels at the
    /// default geometry, scaled by `eye_scale`) onto the whole screen.
    pub fn for_screen(screen: ScreenSize, eye_scale: f64) -> Self {
        let (w, h) = (f64::from(screen.w), f64::from(screen.h));
        Self {
            x: [w / 2.0, w / 10.8 / eye_scale, 0.0, 0.0],
            y: [h / 2.0, 0.0, h / 9.6 / eye_scale, 0.0],
        }
    }

    pub fn apply(&self, v: Point) -> ScreenPoint {
        let b = [1.0, v.x, v.y, v.x * v.y];
        let dot = |c: &[f64; 4]| c.iter().zip(&b).map(|(c, b)| c * b).sum::<f64>();
        ScreenPoint::new(dot(&self.x), dot(&self.y))
    }

    /// Newton solve for the vector that maps onto `target`.
    pub fn invert(&self, target: ScreenPoint) -> Option<Point> {
        let mut v = Point::new(0.0, 0.0);
        for _ in 0..50 {
            let p = self.apply(v);
            let (rx, ry) = (p.x - target.x, p.y - target.y);
            let j11 = self.x[1] + self.x[3] * v.y;
            let j12 = self.x[2] + self.x[3] * v.x;
            let j21 = self.y[1] + self.y[3] * v.y;
            let j22 = self.y[2] + self.y[3] * v.x;
            let det = j11 * j22 - j12 * j21;
            if det.abs() < 1e-12 {
                return None;
            }
            let step = Point::new((j22 * rx - j12 * ry) / det, (j11 * ry - j21 * rx) / det);
            v = v - step;
            if step.norm() < 1e-13 {
                break;
            }
        }
        let p = self.apply(v);
        (p.distance(target) < 1e-6 && v.x.is_finite() && v.y.is_finite()).then_some(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanSegment {
    /// Saccade to each of the five targets in turn, then dwell on it. Only
    /// dwell frames carry a target label.
    Calibration {
        #[serde(default = "default_dwell")]
        dwell_frames: usize,
        #[serde(default = "default_saccade")]
        saccade_frames: usize,
    },
    /// Random fixations joined by saccades; every frame is labeled.
    FreeGaze {
        frames: usize,
        #[serde(default = "default_min_dwell")]
        min_dwell: usize,
        #[serde(default = "default_max_dwell")]
        max_dwell: usize,
    },
    Fixate { x: f64, y: f64, frames: usize },
    /// Linear move from the current point, labeled every frame.
    Move { x: f64, y: f64, frames: usize },
    /// Eye closed at the current point; no target label.
    Blink { frames: usize },
}

fn default_dwell() -> usize {
    40
}
fn default_saccade() -> usize {
    8
}
fn default_min_dwell() -> usize {
    10
}
fn default_max_dwell() -> usize {
    30
}

impl PlanSegment {
    pub fn kind_name(&self) -> &'static str {
        match self {
            PlanSegment::Calibration { .. } => "calibration",
            PlanSegment::FreeGaze { .. } => "free_gaze",
            PlanSegment::Fixate { .. } => "fixate",
            PlanSegment::Move { .. } => "move",
            PlanSegment::Blink { .. } => "blink",
        }
    }
}

/// Photometric copies of calibration dwell frames for regressor training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentPlan {
    pub copies: usize,
    /// Every `stride`-th labeled calibration frame is augmented.
    pub stride: usize,
}

impl Default for AugmentPlan {
    fn default() -> Self {
        Self { copies: 2, stride: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default)]
    pub screen: ScreenSize,
    #[serde(default = "default_fps")]
    pub fps: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub eye: EyeGeometry,
    /// Defaults to [`TruthMapping::for_screen`].
    #[serde(default)]
    pub truth: Option<TruthMapping>,
    pub segments: Vec<PlanSegment>,
    #[serde(default)]
    pub augment: Option<AugmentPlan>,
}

fn default_fps() -> u32 {
    30
}

impl GenerateConfig {
    pub fn calibration_preset(seed: u64) -> Self {
        Self {
            screen: ScreenSize::default(),
            fps: 30,
            seed,
            noise_sigma: 0.0,
            eye: EyeGeometry::default(),
            truth: None,
            segments: vec![PlanSegment::Calibration {
                dwell_frames: 40,
                saccade_frames: 8,
            }],
            augment: None,
        }
    }

    /// Calibration followed by `frames` of free gaze.
    pub fn free_gaze_preset(seed: u64, frames: usize, noise_sigma: f64) -> Self {
        let mut c = Self::calibration_preset(seed);
        c.noise_sigma = noise_sigma;
        c.segments.push(PlanSegment::FreeGaze {
            frames,
            min_dwell: 10,
            max_dwell: 30,
        });
        c
    }

    pub fn truth_mapping(&self) -> TruthMapping {
        self.truth.unwrap_or_else(|| {
            TruthMapping::for_screen(self.screen, self.eye.width as f64 / EyeGeometry::default().width as f64)
        })
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        serde_json::from_str(text).map_err(|e| IoError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let bad = |m: String| Err(IoError::Config(m));
        if self.fps == 0 {
            return bad("fps must be positive".into());
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be finite and >= 0".into());
        }
        if self.segments.is_empty() {
            return bad("plan has no segments".into());
        }
        for s in &self.segments {
            let n = match s {
                PlanSegment::Calibration {
                    dwell_frames,
                    saccade_frames,
                } => {
                    if *saccade_frames == 0 {
                        return bad("saccade_frames must be positive".into());
                    }
                    *dwell_frames
                }
                PlanSegment::FreeGaze {
                    frames,
                    min_dwell,
                    max_dwell,
                } => {
                    if *min_dwell == 0 || min_dwell > max_dwell {
                        return bad("free_gaze needs 0 < min_dwell <= max_dwell".into());
                    }
                    *frames
                }
                PlanSegment::Fixate { frames, .. }
                | PlanSegment::Move { frames, .. }
                | PlanSegment::Blink { frames } => *frames,
            };
            if n == 0 {
                return bad(format!("{} segment has 0 frames", s.kind_name()));
            }
        }
        if let Some(a) = &self.augment {
            if a.stride == 0 {
                return bad("augment.stride must be positive".into());
            }
        }
        default_targets(self.screen).map_err(|e| IoError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Inclusive frame range produced by one plan segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub kind: String,
    pub first: u64,
    pub last: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentItem {
    pub source: u64,
    pub spec: AugmentSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSet {
    pub frames: String,
    pub truth: String,
    pub items: Vec<AugmentItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub frames: String,
    pub truth: String,
    pub frame_count: u64,
    pub width: u32,
    pub height: u32,
    pub fps_num: u32,
    pub fps_den: u32,
    pub seed: u64,
    pub screen: ScreenSize,
    pub segments: Vec<SegmentRecord>,
    pub augmented: Option<AugmentedSet>,
    pub config: GenerateConfig,
}

/// A dataset directory with a parsed manifest.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, IoError> {
        let dir = dir.as_ref().to_path_buf();
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| IoError::Format(format!("manifest: {e}")))?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(IoError::Format(format!(
                "unsupported schema version {}",
                manifest.schema_version
            )));
        }
        Ok(Self { dir, manifest })
    }

    pub fn frames_path(&self) -> PathBuf {
        self.dir.join(&self.manifest.frames)
    }

    pub fn truth_path(&self) -> PathBuf {
        self.dir.join(&self.manifest.truth)
    }

    pub fn frames(&self) -> Result<ContainerReader<std::io::BufReader<fs::File>>, IoError> {
        let r = ContainerReader::open(self.frames_path())?;
        if u64::from(r.header().frame_count) != self.manifest.frame_count {
            return Err(IoError::Mismatch(format!(
                "container holds {} frames, manifest says {}",
                r.header().frame_count,
                self.manifest.frame_count
            )));
        }
        Ok(r)
    }

    pub fn truth(&self) -> Result<Vec<TruthRecord>, IoError> {
        let t: Vec<TruthRecord> = read_ndjson(self.truth_path())?;
        if t.len() as u64 != self.manifest.frame_count {
            return Err(IoError::Mismatch(format!(
                "sidecar has {} records, manifest says {} frames",
                t.len(),
                self.manifest.frame_count
            )));
        }
        Ok(t)
    }

    /// Frame ranges of one segment kind.
    pub fn segments_of<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a SegmentRecord> + 'a {
        self.manifest.segments.iter().filter(move |s| s.kind == kind)
    }
}

struct ScriptBuilder<'a> {
    cfg: &'a GenerateConfig,
    truth: TruthMapping,
    script: GazeScript,
    current: ScreenPoint,
    segments: Vec<SegmentRecord>,
}

impl ScriptBuilder<'_> {
    fn vector_for(&self, p: ScreenPoint) -> Result<Point, IoError> {
        let v = self
            .truth
            .invert(p)
            .ok_or_else(|| IoError::Config(format!("truth mapping cannot reach ({}, {})", p.x, p.y)))?;
        self.cfg
            .eye
            .scene(v, 0.0, 0)
            .validate()
            .map_err(|e| IoError::Config(format!("target ({:.1}, {:.1}) leaves the eye model: {e}", p.x, p.y)))?;
        Ok(v)
    }

    fn hold(&mut self, p: ScreenPoint, frames: usize, label: bool) -> Result<(), IoError> {
        let v = self.vector_for(p)?;
        let scene = self.cfg.eye.scene(v, self.cfg.noise_sigma, self.cfg.seed);
        let mut seg = ScriptSegment::hold(scene, frames);
        if label {
            seg = seg.with_target(TargetLabel::Fixed { point: p });
        }
        self.script.push(seg);
        self.current = p;
        Ok(())
    }

    /// One exact-label frame per step; the last frame lands on `to`.
    fn travel(&mut self, to: ScreenPoint, frames: usize, label: bool) -> Result<(), IoError> {
        let from = self.current;
        for k in 1..=frames {
            self.hold(from.lerp(to, k as f64 / frames as f64), 1, label)?;
        }
        Ok(())
    }

    fn blink(&mut self, frames: usize) -> Result<(), IoError> {
        let first = self.script.frame_count();
        self.hold(self.current, frames, false)?;
        self.script.blink_markers.push(BlinkMarker {
            first,
            last: first + frames - 1,
        });
        Ok(())
    }

    fn add(&mut self, index: usize, seg: &PlanSegment) -> Result<(), IoError> {
        let first = self.script.frame_count() as u64;
        match *seg {
            PlanSegment::Calibration {
                dwell_frames,
                saccade_frames,
            } => {
                let targets = default_targets(self.cfg.screen).map_err(|e| IoError::Config(e.to_string()))?;
                for &t in targets.points() {
                    self.travel(t, saccade_frames, false)?;
                    self.hold(t, dwell_frames, true)?;
                }
            }
            PlanSegment::FreeGaze {
                frames,
                min_dwell,
                max_dwell,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ (0x5eed_0000 + index as u64));
                let (w, h) = (f64::from(self.cfg.screen.w), f64::from(self.cfg.screen.h));
                let mut left = frames;
                while left > 0 {
                    let to = ScreenPoint::new(
                        rng.random_range(0.05 * w..0.95 * w),
                        rng.random_range(0.05 * h..0.95 * h),
                    );
                    // 1-2 frames at 30 fps, in line with real saccade durations.
                    let sac = rng.random_range(1..=2).min(left);
                    self.travel(to, sac, true)?;
                    left -= sac;
                    let dwell = rng.random_range(min_dwell..=max_dwell).min(left);
                    if dwell > 0 {
                        self.hold(to, dwell, true)?;
                        left -= dwell;
                    }
                }
            }
            PlanSegment::Fixate { x, y, frames } => self.hold(ScreenPoint::new(x, y), frames, true)?,
            PlanSegment::Move { x, y, frames } => self.travel(ScreenPoint::new(x, y), frames, true)?,
            PlanSegment::Blink { frames } => self.blink(frames)?,
        }
        self.segments.push(SegmentRecord {
            kind: seg.kind_name().to_string(),
            first,
            last: self.script.frame_count() as u64 - 1,
        });
        Ok(())
    }
}

/// Expands a plan into the synthetic script and per-segment frame ranges.
pub fn build_script(cfg: &GenerateConfig) -> Result<(GazeScript, Vec<SegmentRecord>), IoError> {
    cfg.validate()?;
    let mut b = ScriptBuilder {
        cfg,
        truth: cfg.truth_mapping(),
        script: GazeScript::default(),
        current: ScreenPoint::new(f64::from(cfg.screen.w) / 2.0, f64::from(cfg.screen.h) / 2.0),
        segments: Vec::new(),
    };
    for (i, s) in cfg.segments.iter().enumerate() {
        b.add(i, s)?;
    }
    if b.script.frame_count() > u32::MAX as usize {
        return Err(IoError::Config("too many frames".into()));
    }
    Ok((b.script, b.segments))
}

/// Renders the plan into `out_dir` (created if needed) and writes the
/// manifest. Output is a pure function of the config.
pub fn generate(cfg: &GenerateConfig, out_dir: impl AsRef<Path>) -> Result<Dataset, IoError> {
    let (script, segments) = build_script(cfg)?;
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut frames_out = ContainerWriter::create(
        dir.join(FRAMES_FILE),
        cfg.eye.width as u32,
        cfg.eye.height as u32,
        cfg.fps,
        1,
    )?;
    let mut truth_out = NdjsonWriter::create(dir.join(TRUTH_FILE))?;
    let calibration: Vec<&SegmentRecord> = segments.iter().filter(|s| s.kind == "calibration").collect();
    let mut sources: Vec<(Frame, TruthRecord)> = Vec::new();
    let mut labeled = 0usize;
    for item in script.frames().map_err(|e| IoError::Config(e.to_string()))? {
        let (frame, gt) = item.map_err(|e| IoError::Config(e.to_string()))?;
        let rec = TruthRecord::from(&gt);
        if let Some(plan) = &cfg.augment {
            let i = rec.i;
            if rec.target().is_some() && calibration.iter().any(|s| (s.first..=s.last).contains(&i)) {
                if labeled.is_multiple_of(plan.stride) {
                    sources.push((frame.clone(), rec));
                }
                labeled += 1;
            }
        }
        frames_out.write_frame(&frame)?;
        truth_out.write(&rec)?;
    }
    let (header, _) = frames_out.finish()?;
    truth_out.finish()?;

    let augmented = match &cfg.augment {
        Some(plan) => Some(write_augmented(cfg, plan, &sources, dir)?),
        None => None,
    };

    let manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        frames: FRAMES_FILE.into(),
        truth: TRUTH_FILE.into(),
        frame_count: u64::from(header.frame_count),
        width: header.width,
        height: header.height,
        fps_num: header.fps_num,
        fps_den: header.fps_den,
        seed: cfg.seed,
        screen: cfg.screen,
        segments,
        augmented,
        config: cfg.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(Dataset {
        dir: dir.to_path_buf(),
        manifest,
    })
}

fn write_augmented(
    cfg: &GenerateConfig,
    plan: &AugmentPlan,
    sources: &[(Frame, TruthRecord)],
    dir: &Path,
) -> Result<AugmentedSet, IoError> {
    let mut frames = ContainerWriter::create(
        dir.join(AUGMENTED_FRAMES_FILE),
        cfg.eye.width as u32,
        cfg.eye.height as u32,
        cfg.fps,
        1,
    )?;
    let mut truth = NdjsonWriter::create(dir.join(AUGMENTED_TRUTH_FILE))?;
    let mut items = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xa095_e000);
    for (frame, rec) in sources {
        for _ in 0..plan.copies {
            let spec = AugmentSpec::sample_photometric(rng.random());
            let out = augment(frame, &spec).map_err(|e| IoError::Config(e.to_string()))?;
            frames.write_frame(&out)?;
            truth.write(&TruthRecord {
                i: items.len() as u64,
                ..*rec
            })?;
            items.push(AugmentItem {
                source: rec.i,
                spec,
            });
        }
    }
    frames.finish()?;
    truth.finish()?;
    Ok(AugmentedSet {
        frames: AUGMENTED_FRAMES_FILE.into(),
        truth: AUGMENTED_TRUTH_FILE.into(),
        items,
    })
}
