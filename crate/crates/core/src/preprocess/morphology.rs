use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::frame::{BinaryMask, Frame};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphOp {
    Dilate,
    Erode,
    Open,
    Close,
}

pub(crate) fn check_kernel(k: usize) -> Result<usize, PreprocessError> {
    if k < 3 || k.is_multiple_of(2) {
        Err(PreprocessError::InvalidKernel(k))
    } else {
        Ok(k / 2)
    }
}

/// Binary morphology with a `k`x`k` square structuring element. Pixels
/// outside the mask count as unset.
pub fn morphology(mask: &BinaryMask, op: MorphOp, k: usize) -> Result<BinaryMask, PreprocessError> {
    let r = check_kernel(k)?;
    Ok(match op {
        MorphOp::Dilate => dilate(mask, r),
        MorphOp::Erode => erode(mask, r),
        MorphOp::Open => dilate(&erode(mask, r), r),
        MorphOp::Close => erode(&dilate(mask, r), r),
    })
}

fn dilate(mask: &BinaryMask, r: usize) -> BinaryMask {
    separable(mask, r, |count, _| count > 0)
}

fn erode(mask: &BinaryMask, r: usize) -> BinaryMask {
    // The full window must be in bounds and set, so out-of-bounds taps
    // simply never reach the required count.
    separable(mask, r, |count, full| count == full)
}

/// Row pass then column pass of a sliding-window set-bit count.
fn separable(mask: &BinaryMask, r: usize, keep: impl Fn(usize, usize) -> bool) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let full = 2 * r + 1;
    let line = |get: &dyn Fn(usize) -> bool, len: usize, out: &mut dyn FnMut(usize, bool)| {
        let mut prefix = vec![0usize; len + 1];
        for i in 0..len {
            prefix[i + 1] = prefix[i] + usize::from(get(i));
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(len);
            out(i, keep(prefix[hi] - prefix[lo], full));
        }
    };

    let mut rows = BinaryMask::empty(w, h);
    for y in 0..h {
        line(&|x| mask.get(x, y), w, &mut |x, v| rows.set(x, y, v));
    }
    let mut out = BinaryMask::empty(w, h);
    for x in 0..w {
        line(&|y| rows.get(x, y), h, &mut |y, v| out.set(x, y, v));
    }
    out
}

/// Grayscale max (`dilate`) or min (`erode`) filter over a square window,
/// ignoring out-of-bounds taps.
pub(crate) fn gray_extremum(frame: &Frame, r: usize, take_max: bool) -> Frame {
    let (w, h) = (frame.width(), frame.height());
    let pick = |a: u8, b: u8| if take_max { a.max(b) } else { a.min(b) };
    let mut rows = frame.clone();
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            let v = (lo..=hi).map(|i| frame.get(i, y)).reduce(pick).expect("window non-empty");
            rows.set(x, y, v);
        }
    }
    let mut out = rows.clone();
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            let v = (lo..=hi).map(|j| rows.get(x, j)).reduce(pick).expect("window non-empty");
            out.set(x, y, v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opening_removes_speckle() {
        let mut m = BinaryMask::empty(9, 9);
        m.set(4, 4, true);
        assert!(morphology(&m, MorphOp::Open, 3).unwrap().is_empty());
    }

    #[test]
    fn dilate_empty_is_empty() {
        let m = BinaryMask::empty(7, 5);
        assert!(morphology(&m, MorphOp::Dilate, 5).unwrap().is_empty());
    }

    #[test]
    fn erode_clears_border_contact() {
        let full = BinaryMask::from_fn(5, 5, |_, _| true);
        let e = morphology(&full, MorphOp::Erode, 3).unwrap();
        assert_eq!(e.count(), 9);
        assert!(!e.get(0, 2));
        assert!(e.get(2, 2));
    }

    #[test]
    fn kernel_validation() {
        let m = BinaryMask::empty(4, 4);
        for k in [0, 1, 2, 4] {
            assert_eq!(
                morphology(&m, MorphOp::Dilate, k),
                Err(PreprocessError::InvalidKernel(k))
            );
        }
    }
}
