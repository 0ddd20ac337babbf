use serde::{Deserialize, Serialize};

use super::{render_eye_frame, GroundTruth, SynthError, SyntheticScene};
use crate::frame::{Frame, Point};
use crate::screen::ScreenPoint;

/// End-of-segment values for the parameters a segment can ramp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRamp {
    pub iris_center: Point,
    pub pupil_center: Point,
    pub glint_offset: Point,
    pub eyelid_closure: f64,
}

impl SceneRamp {
    pub fn from_scene(scene: &SyntheticScene) -> Self {
        Self {
            iris_center: scene.iris_center,
            pupil_center: scene.pupil_center,
            glint_offset: scene.glint_offset,
            eyelid_closure: scene.eyelid_closure,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TargetLabel {
    #[default]
    None,
    Fixed { point: ScreenPoint },
    Ramp { from: ScreenPoint, to: ScreenPoint },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptSegment {
    pub frames: usize,
    /// Scene at the first frame of the segment.
    pub scene: SyntheticScene,
    /// Scene at the last frame; parameters in between are linear in the frame
    /// index.
    #[serde(default)]
    pub ramp_to: Option<SceneRamp>,
    #[serde(default)]
    pub target: TargetLabel,
}

impl ScriptSegment {
    pub fn hold(scene: SyntheticScene, frames: usize) -> Self {
        Self {
            frames,
            scene,
            ramp_to: None,
            target: TargetLabel::None,
        }
    }

    pub fn with_target(mut self, target: TargetLabel) -> Self {
        self.target = target;
        self
    }

    pub fn ramp(mut self, to: SceneRamp) -> Self {
        self.ramp_to = Some(to);
        self
    }

    fn scene_at(&self, k: usize) -> SyntheticScene {
        let Some(end) = &self.ramp_to else {
            return self.scene.clone();
        };
        let t = if self.frames > 1 {
            k as f64 / (self.frames - 1) as f64
        } else {
            0.0
        };
        SyntheticScene {
            iris_center: self.scene.iris_center.lerp(end.iris_center, t),
            pupil_center: self.scene.pupil_center.lerp(end.pupil_center, t),
            glint_offset: self.scene.glint_offset.lerp(end.glint_offset, t),
            eyelid_closure: self.scene.eyelid_closure
                + (end.eyelid_closure - self.scene.eyelid_closure) * t,
            ..self.scene.clone()
        }
    }

    fn target_at(&self, k: usize) -> Option<ScreenPoint> {
        match &self.target {
            TargetLabel::None => None,
            TargetLabel::Fixed { point } => Some(*point),
            TargetLabel::Ramp { from, to } => {
                let t = if self.frames > 1 {
                    k as f64 / (self.frames - 1) as f64
                } else {
                    0.0
                };
                Some(from.lerp(*to, t))
            }
        }
    }
}

/// Inclusive range of global frame indices rendered with the eye closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlinkMarker {
    pub first: usize,
    pub last: usize,
}

impl BlinkMarker {
    pub fn contains(&self, i: usize) -> bool {
        (self.first..=self.last).contains(&i)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GazeScript {
    pub segments: Vec<ScriptSegment>,
    #[serde(default)]
    pub blink_markers: Vec<BlinkMarker>,
}

impl GazeScript {
    pub fn frame_count(&self) -> usize {
        self.segments.iter().map(|s| s.frames).sum()
    }

    pub fn push(&mut self, segment: ScriptSegment) {
        self.segments.push(segment);
    }

    /// Lazily renders the script. Each frame's noise is seeded from the
    /// segment scene seed plus the global frame index.
    pub fn frames(&self) -> Result<ScriptFrames<'_>, SynthError> {
        if self.frame_count() == 0 {
            return Err(SynthError::EmptyScript);
        }
        Ok(ScriptFrames {
            script: self,
            segment: 0,
            within: 0,
            index: 0,
        })
    }

    /// Scene and truth for global frame `index` without rendering.
    fn describe(&self, segment: usize, within: usize, index: usize) -> (SyntheticScene, GroundTruth) {
        let seg = &self.segments[segment];
        let mut scene = seg.scene_at(within);
        scene.rng_seed = scene.rng_seed.wrapping_add(index as u64);
        if self.blink_markers.iter().any(|m| m.contains(index)) {
            scene.eyelid_closure = 1.0;
        }
        let truth = GroundTruth {
            frame_index: index,
            pccr_vector: scene.pccr_vector(),
            screen_target: seg.target_at(within),
            blink: scene.is_blink(),
        };
        (scene, truth)
    }
}

pub struct ScriptFrames<'a> {
    script: &'a GazeScript,
    segment: usize,
    within: usize,
    index: usize,
}

impl ScriptFrames<'_> {
    /// Advances without rendering; used when only truth labels are needed.
    pub fn next_truth(&mut self) -> Option<(SyntheticScene, GroundTruth)> {
        while self.segment < self.script.segments.len()
            && self.within >= self.script.segments[self.segment].frames
        {
            self.segment += 1;
            self.within = 0;
        }
        if self.segment >= self.script.segments.len() {
            return None;
        }
        let out = self.script.describe(self.segment, self.within, self.index);
        self.within += 1;
        self.index += 1;
        Some(out)
    }
}

impl Iterator for ScriptFrames<'_> {
    type Item = Result<(Frame, GroundTruth), SynthError>;

    fn next(&mut self) -> Option<Self::Item> {
        let (scene, truth) = self.next_truth()?;
        Some(render_eye_frame(&scene).map(|f| (f, truth)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::run_script;

    #[test]
    fn static_script_repeats_frame() {
        let script = GazeScript {
            segments: vec![ScriptSegment::hold(SyntheticScene::reference(), 30)],
            blink_markers: vec![],
        };
        let (frames, truths) = run_script(&script).unwrap();
        assert_eq!(frames.len(), 30);
        assert!(frames.windows(2).all(|w| w[0] == w[1]));
        assert!(truths.iter().all(|t| !t.blink));
        assert_eq!(truths[29].frame_index, 29);
    }

    #[test]
    fn blink_markers_pass_through() {
        let script = GazeScript {
            segments: vec![ScriptSegment::hold(SyntheticScene::reference(), 30)],
            blink_markers: vec![BlinkMarker { first: 10, last: 18 }],
        };
        let (frames, truths) = run_script(&script).unwrap();
        for (i, (t, f)) in truths.iter().zip(&frames).enumerate() {
            assert_eq!(t.blink, (10..=18).contains(&i), "frame {i}");
            assert_eq!(f.pixels().iter().any(|&p| p >= 200), !t.blink);
        }
    }

    #[test]
    fn glint_ramp_interpolates_linearly() {
        let start = SyntheticScene {
            glint_offset: Point::new(0.0, 0.0),
            ..SyntheticScene::reference()
        };
        let mut end = SceneRamp::from_scene(&start);
        end.glint_offset = Point::new(6.0, 0.0);
        let script = GazeScript {
            segments: vec![ScriptSegment::hold(start, 7).ramp(end)],
            blink_markers: vec![],
        };
        let (_, truths) = run_script(&script).unwrap();
        let du: Vec<f64> = truths.iter().map(|t| t.pccr_vector.x).collect();
        assert_eq!(du, vec![0.0, -1.0, -2.0, -3.0, -4.0, -5.0, -6.0]);
        assert!(truths.iter().all(|t| t.pccr_vector.y == 0.0));
    }

    #[test]
    fn empty_script_is_an_error() {
        assert!(matches!(
            GazeScript::default().frames(),
            Err(SynthError::EmptyScript)
        ));
    }

    #[test]
    fn invalid_scene_propagates() {
        let bad = SyntheticScene {
            pupil_radius: -1.0,
            ..SyntheticScene::reference()
        };
        let script = GazeScript {
            segments: vec![ScriptSegment::hold(bad, 2)],
            blink_markers: vec![],
        };
        assert!(matches!(
            run_script(&script),
            Err(SynthError::InvalidScene(_))
        ));
    }
}
