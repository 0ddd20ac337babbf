//! Virtual screen geometry shared by calibration, the event engine and the
//! wire protocol.

use serde::{Deserialize, Serialize};

/// Portrait phone default.
pub const DEFAULT_SCREEN: ScreenSize = ScreenSize {
    w: 1080,
    h: 1920,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScreenSize {
    pub w: u32,
    pub h: u32,
}

impl ScreenSize {
    pub const fn new(w: u32, h: u32) -> Self {
        Self { w, h }
    }

    /// Clamps into `[0, w-1] x [0, h-1]`.
    pub fn clamp(&self, p: ScreenPoint) -> ScreenPoint {
        let max_x = f64::from(self.w.saturating_sub(1));
        let max_y = f64::from(self.h.saturating_sub(1));
        ScreenPoint::new(clamp_finite(p.x, max_x), clamp_finite(p.y, max_y))
    }

    pub fn contains(&self, p: ScreenPoint) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < f64::from(self.w) && p.y < f64::from(self.h)
    }
}

fn clamp_finite(v: f64, max: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, max)
    }
}

impl Default for ScreenSize {
    fn default() -> Self {
        DEFAULT_SCREEN
    }
}

/// A position on the virtual screen, in screen pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScreenPoint {
    pub x: f64,
    pub y: f64,
}

impl ScreenPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: ScreenPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: ScreenPoint, t: f64) -> ScreenPoint {
        ScreenPoint::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Axis-aligned rectangle, half-open: `[x, x+w) x [y, y+h)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn contains(&self, p: ScreenPoint) -> bool {
        p.x >= self.x && p.x < self.x + self.w && p.y >= self.y && p.y < self.y + self.h
    }

    pub fn center(&self) -> ScreenPoint {
        ScreenPoint::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x < other.x + other.w
            && other.x < self.x + self.w
            && self.y < other.y + other.h
            && other.y < self.y + self.h
    }

    pub fn union(&self, other: &Rect) -> Rect {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = (self.x + self.w).max(other.x + other.w);
        let y1 = (self.y + self.h).max(other.y + other.h);
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }
}
