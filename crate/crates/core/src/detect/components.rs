use crate::frame::{BinaryMask, Frame};
use crate::preprocess::{morphology, MorphOp};

/// One 8-connected blob of set bits.
#[derive(Clone, Debug)]
pub(crate) struct Component {
    /// Row-major pixel indices into the source mask.
    pub pixels: Vec<usize>,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Component {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

pub(crate) fn label(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut seen = vec![false; bits.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..bits.len() {
        if !bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Component {
            pixels: Vec::new(),
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
        };
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            comp.pixels.push(i);
            comp.x0 = comp.x0.min(x);
            comp.x1 = comp.x1.max(x);
            comp.y0 = comp.y0.min(y);
            comp.y1 = comp.y1.max(y);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if bits[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        comp.pixels.sort_unstable();
        out.push(comp);
    }
    out
}

/// A component re-expressed on a small window of the frame, with a margin
/// so that dilations stay inside the window when possible.
pub(crate) struct LocalRegion {
    pub ox: usize,
    pub oy: usize,
    /// Component pixels plus any 4-connected holes they enclose.
    pub filled: BinaryMask,
    /// Enclosed holes only.
    pub holes: BinaryMask,
}

impl LocalRegion {
    pub fn new(frame: &Frame, comp: &Component, margin: usize) -> Self {
        let ox = comp.x0.saturating_sub(margin);
        let oy = comp.y0.saturating_sub(margin);
        let ex = (comp.x1 + margin).min(frame.width() - 1);
        let ey = (comp.y1 + margin).min(frame.height() - 1);
        let (w, h) = (ex - ox + 1, ey - oy + 1);
        let mut member = BinaryMask::empty(w, h);
        for &i in &comp.pixels {
            let (x, y) = (i % frame.width(), i / frame.width());
            member.set(x - ox, y - oy, true);
        }

        // Flood the complement from the window edge; whatever it cannot reach
        // is enclosed by the component.
        let mut outside = BinaryMask::empty(w, h);
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for x in 0..w {
            stack.push((x, 0));
            stack.push((x, h - 1));
        }
        for y in 0..h {
            stack.push((0, y));
            stack.push((w - 1, y));
        }
        while let Some((x, y)) = stack.pop() {
            if member.get(x, y) || outside.get(x, y) {
                continue;
            }
            outside.set(x, y, true);
            if x > 0 {
                stack.push((x - 1, y));
            }
            if x + 1 < w {
                stack.push((x + 1, y));
            }
            if y > 0 {
                stack.push((x, y - 1));
            }
            if y + 1 < h {
                stack.push((x, y + 1));
            }
        }
        let holes = BinaryMask::from_fn(w, h, |x, y| !member.get(x, y) && !outside.get(x, y));
        let filled = BinaryMask::from_fn(w, h, |x, y| !outside.get(x, y));
        Self {
            ox,
            oy,
            filled,
            holes,
        }
    }

    pub fn dilated(mask: &BinaryMask, r: usize) -> BinaryMask {
        morphology(mask, MorphOp::Dilate, 2 * r + 1).expect("odd kernel")
    }

    /// Frame values at set positions of a local mask.
    pub fn values(&self, frame: &Frame, mask: &BinaryMask) -> Vec<u8> {
        mask.iter_set()
            .map(|(x, y)| frame.get(x + self.ox, y + self.oy))
            .collect()
    }
}

pub(crate) fn median(values: &mut [u8]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    Some(f64::from(values[values.len() / 2]))
}

pub(crate) fn quantile(values: &mut [u8], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let i = ((values.len() - 1) as f64 * q).round() as usize;
    Some(f64::from(values[i]))
}
