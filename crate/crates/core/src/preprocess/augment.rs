use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::morphology::{check_kernel, gray_extremum};
use super::PreprocessError;
use crate::frame::Frame;

/// One augmentation step. Geometry ops resample bilinearly; intensity ops
/// clamp to `0..=255`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AugmentOp {
    FlipH,
    FlipV,
    /// Counter-clockwise degrees about the frame center; exposed corners take
    /// the mean of the source border.
    Rotate { deg: f64 },
    Resize { w: usize, h: usize },
    Pad { l: usize, r: usize, t: usize, b: usize, fill: u8 },
    Brightness { delta: i32 },
    /// Scales deviation from the frame mean.
    Contrast { gain: f64 },
    /// Grayscale stand-in for saturation: clamp intensities into `[lo, hi]`.
    SaturateClamp { lo: u8, hi: u8 },
    Sharpen,
    /// Box blur over a `(2*radius+1)` square.
    Blur { radius: usize },
    Dilate { k: usize },
    Erode { k: usize },
    Open { k: usize },
    Close { k: usize },
}

/// Ordered augmentation pipeline plus the seed its parameters were drawn
/// with. Serializes as a JSON array of `{"op": ..., params..., "seed": n}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AugmentSpec {
    pub ops: Vec<AugmentOp>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct OpRecord {
    #[serde(flatten)]
    op: AugmentOp,
    seed: u64,
}

impl Serialize for AugmentSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.ops.iter().map(|op| OpRecord {
            op: op.clone(),
            seed: self.seed,
        }))
    }
}

impl<'de> Deserialize<'de> for AugmentSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let records = Vec::<OpRecord>::deserialize(deserializer)?;
        let seed = records.first().map_or(0, |r| r.seed);
        if records.iter().any(|r| r.seed != seed) {
            return Err(D::Error::custom("all ops in one spec share a seed"));
        }
        Ok(Self {
            ops: records.into_iter().map(|r| r.op).collect(),
            seed,
        })
    }
}

impl AugmentSpec {
    pub fn new(ops: Vec<AugmentOp>) -> Self {
        Self { ops, seed: 0 }
    }

    /// Draws a random photometric pipeline (brightness, contrast, clamp,
    /// blur or sharpen). These ops leave feature geometry in place, so
    /// labels attached to the source frame stay valid.
    pub fn sample_photometric(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ops = Vec::new();
        if rng.random_bool(0.8) {
            ops.push(AugmentOp::Brightness {
                delta: rng.random_range(-25..=25),
            });
        }
        if rng.random_bool(0.6) {
            ops.push(AugmentOp::Contrast {
                gain: rng.random_range(0.85..1.2),
            });
        }
        if rng.random_bool(0.3) {
            ops.push(AugmentOp::SaturateClamp {
                lo: rng.random_range(0..6),
                hi: rng.random_range(250..=255),
            });
        }
        match rng.random_range(0..3) {
            0 => ops.push(AugmentOp::Blur { radius: 1 }),
            1 => ops.push(AugmentOp::Sharpen),
            _ => {}
        }
        Self { ops, seed }
    }

    /// Draws a pipeline from the full catalogue, geometry included.
    pub fn sample_full(seed: u64, width: usize, height: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = Self::sample_photometric(rng.random());
        spec.seed = seed;
        if rng.random_bool(0.5) {
            spec.ops.push(AugmentOp::FlipH);
        }
        if rng.random_bool(0.2) {
            spec.ops.push(AugmentOp::FlipV);
        }
        if rng.random_bool(0.5) {
            spec.ops.push(AugmentOp::Rotate {
                deg: rng.random_range(-15.0..15.0),
            });
        }
        if rng.random_bool(0.3) {
            let pad = rng.random_range(1..6);
            spec.ops.push(AugmentOp::Pad {
                l: pad,
                r: pad,
                t: pad,
                b: pad,
                fill: rng.random(),
            });
            spec.ops.push(AugmentOp::Resize {
                w: width.max(8),
                h: height.max(8),
            });
        }
        if rng.random_bool(0.2) {
            spec.ops.push(match rng.random_range(0..4) {
                0 => AugmentOp::Dilate { k: 3 },
                1 => AugmentOp::Erode { k: 3 },
                2 => AugmentOp::Open { k: 3 },
                _ => AugmentOp::Close { k: 3 },
            });
        }
        spec
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        let bad = |m: String| Err(PreprocessError::InvalidSpec(m));
        for op in &self.ops {
            match *op {
                AugmentOp::Rotate { deg } => {
                    if !(deg.is_finite() && deg > -45.0 && deg <= 45.0) {
                        return bad(format!("rotation {deg} outside (-45, 45]"));
                    }
                }
                AugmentOp::Resize { w, h } => {
                    if w < 8 || h < 8 {
                        return bad(format!("resize target {w}x{h} below 8x8"));
                    }
                }
                AugmentOp::Contrast { gain } => {
                    if !(gain.is_finite() && gain >= 0.0) {
                        return bad(format!("contrast gain {gain} must be >= 0"));
                    }
                }
                AugmentOp::SaturateClamp { lo, hi } => {
                    if lo > hi {
                        return bad(format!("clamp range [{lo}, {hi}] is empty"));
                    }
                }
                AugmentOp::Blur { radius } => {
                    if radius == 0 {
                        return bad("blur radius must be >= 1".into());
                    }
                }
                AugmentOp::Dilate { k }
                | AugmentOp::Erode { k }
                | AugmentOp::Open { k }
                | AugmentOp::Close { k } => {
                    if check_kernel(k).is_err() {
                        return bad(format!("kernel size {k} must be odd and >= 3"));
                    }
                }
                AugmentOp::FlipH
                | AugmentOp::FlipV
                | AugmentOp::Pad { .. }
                | AugmentOp::Brightness { .. }
                | AugmentOp::Sharpen => {}
            }
        }
        Ok(())
    }
}

/// Applies `spec.ops` in listed order.
pub fn augment(frame: &Frame, spec: &AugmentSpec) -> Result<Frame, PreprocessError> {
    spec.validate()?;
    let mut out = frame.clone();
    for op in &spec.ops {
        out = apply(&out, op);
    }
    Ok(out)
}

fn apply(f: &Frame, op: &AugmentOp) -> Frame {
    let (w, h) = (f.width(), f.height());
    match *op {
        AugmentOp::FlipH => Frame::from_fn(w, h, |x, y| f.get(w - 1 - x, y)),
        AugmentOp::FlipV => Frame::from_fn(w, h, |x, y| f.get(x, h - 1 - y)),
        AugmentOp::Rotate { deg } => rotate(f, deg),
        AugmentOp::Resize { w: nw, h: nh } => resize(f, nw, nh),
        AugmentOp::Pad { l, r, t, b, fill } => Frame::from_fn(w + l + r, h + t + b, |x, y| {
            if x < l || y < t || x >= l + w || y >= t + h {
                fill
            } else {
                f.get(x - l, y - t)
            }
        }),
        AugmentOp::Brightness { delta } => map_pixels(f, |p| f64::from(p) + f64::from(delta)),
        AugmentOp::Contrast { gain } => {
            let mean = f.pixels().iter().map(|&p| f64::from(p)).sum::<f64>()
                / f.pixels().len() as f64;
            map_pixels(f, |p| (f64::from(p) - mean) * gain + mean)
        }
        AugmentOp::SaturateClamp { lo, hi } => map_pixels(f, |p| f64::from(p.clamp(lo, hi))),
        AugmentOp::Sharpen => {
            let at = |x: isize, y: isize| {
                let cx = x.clamp(0, w as isize - 1) as usize;
                let cy = y.clamp(0, h as isize - 1) as usize;
                f64::from(f.get(cx, cy))
            };
            Frame::from_fn(w, h, |x, y| {
                let (x, y) = (x as isize, y as isize);
                let v = 5.0 * at(x, y) - at(x - 1, y) - at(x + 1, y) - at(x, y - 1) - at(x, y + 1);
                to_u8(v)
            })
        }
        AugmentOp::Blur { radius } => box_blur(f, radius),
        AugmentOp::Dilate { k } => gray_extremum(f, k / 2, true),
        AugmentOp::Erode { k } => gray_extremum(f, k / 2, false),
        AugmentOp::Open { k } => gray_extremum(&gray_extremum(f, k / 2, false), k / 2, true),
        AugmentOp::Close { k } => gray_extremum(&gray_extremum(f, k / 2, true), k / 2, false),
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn map_pixels(f: &Frame, g: impl Fn(u8) -> f64) -> Frame {
    let pixels = f.pixels().iter().map(|&p| to_u8(g(p))).collect();
    Frame::new(f.width(), f.height(), pixels).expect("same dimensions")
}

fn bilinear(f: &Frame, sx: f64, sy: f64) -> f64 {
    let x0 = sx.floor();
    let y0 = sy.floor();
    let (fx, fy) = (sx - x0, sy - y0);
    let xi = x0 as usize;
    let yi = y0 as usize;
    let x1 = (xi + 1).min(f.width() - 1);
    let y1 = (yi + 1).min(f.height() - 1);
    let p = |x: usize, y: usize| f64::from(f.get(x, y));
    (p(xi, yi) * (1.0 - fx) + p(x1, yi) * fx) * (1.0 - fy)
        + (p(xi, y1) * (1.0 - fx) + p(x1, y1) * fx) * fy
}

fn border_mean(f: &Frame) -> f64 {
    let (w, h) = (f.width(), f.height());
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                sum += f64::from(f.get(x, y));
                n += 1;
            }
        }
    }
    sum / n as f64
}

fn rotate(f: &Frame, deg: f64) -> Frame {
    if deg == 0.0 {
        return f.clone();
    }
    let (w, h) = (f.width(), f.height());
    let fill = border_mean(f);
    let (s, c) = deg.to_radians().sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;
    Frame::from_fn(w, h, |x, y| {
        // Inverse map: image y points down, so a counter-clockwise on-screen
        // rotation uses the transposed matrix here.
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        let sx = c * dx - s * dy + cx;
        let sy = s * dx + c * dy + cy;
        let eps = 1e-9;
        if sx < -eps || sy < -eps || sx > max_x + eps || sy > max_y + eps {
            to_u8(fill)
        } else {
            to_u8(bilinear(f, sx.clamp(0.0, max_x), sy.clamp(0.0, max_y)))
        }
    })
}

fn resize(f: &Frame, nw: usize, nh: usize) -> Frame {
    let (w, h) = (f.width(), f.height());
    if (nw, nh) == (w, h) {
        return f.clone();
    }
    let sx = w as f64 / nw as f64;
    let sy = h as f64 / nh as f64;
    Frame::from_fn(nw, nh, |x, y| {
        let px = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
        let py = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        to_u8(bilinear(f, px, py))
    })
}

fn box_blur(f: &Frame, r: usize) -> Frame {
    let (w, h) = (f.width(), f.height());
    let n = (2 * r + 1) as f64;
    let clamp_x = |x: isize| x.clamp(0, w as isize - 1) as usize;
    let clamp_y = |y: isize| y.clamp(0, h as isize - 1) as usize;
    let mut rows = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let sum: f64 = (-(r as isize)..=r as isize)
                .map(|d| f64::from(f.get(clamp_x(x as isize + d), y)))
                .sum();
            rows[y * w + x] = sum / n;
        }
    }
    Frame::from_fn(w, h, |x, y| {
        let sum: f64 = (-(r as isize)..=r as isize)
            .map(|d| rows[clamp_y(y as isize + d) * w + x])
            .sum();
        to_u8(sum / n)
    })
}
