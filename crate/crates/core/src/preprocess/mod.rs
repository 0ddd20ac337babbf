//! Image conditioning: thresholding, background subtraction, binary
//! morphology and the augmentation catalogue used to expand training data.

mod augment;
mod morphology;

pub use augment::{augment, AugmentOp, AugmentSpec};
pub use morphology::{morphology, MorphOp};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{BinaryMask, Frame};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("frame is {actual:?} but background is {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("kernel size must be odd and >= 3, got {0}")]
    InvalidKernel(usize),
    #[error("invalid augmentation spec: {0}")]
    InvalidSpec(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Set where `pixel < threshold`.
    KeepBelow,
    /// Set where `pixel >= threshold`.
    KeepAbove,
}

pub fn binary_threshold(frame: &Frame, threshold: u8, polarity: Polarity) -> BinaryMask {
    let bits = match polarity {
        Polarity::KeepBelow => frame.pixels().iter().map(|&p| p < threshold).collect(),
        Polarity::KeepAbove => frame.pixels().iter().map(|&p| p >= threshold).collect(),
    };
    BinaryMask::new(frame.width(), frame.height(), bits).expect("dimensions come from a frame")
}

/// Per-pixel `|frame - background|`.
pub fn background_subtract(frame: &Frame, background: &Frame) -> Result<Frame, PreprocessError> {
    if !frame.same_dimensions(background) {
        return Err(PreprocessError::DimensionMismatch {
            expected: (background.width(), background.height()),
            actual: (frame.width(), frame.height()),
        });
    }
    let pixels = frame
        .pixels()
        .iter()
        .zip(background.pixels())
        .map(|(&a, &b)| a.abs_diff(b))
        .collect();
    Ok(Frame::new(frame.width(), frame.height(), pixels).expect("same dimensions"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        let zero = Frame::filled(8, 6, 0);
        assert!(binary_threshold(&zero, 1, Polarity::KeepAbove).is_empty());

        let mut f = Frame::filled(8, 6, 0);
        f.set(3, 2, 255);
        let m = binary_threshold(&f, 128, Polarity::KeepAbove);
        assert_eq!(m.iter_set().collect::<Vec<_>>(), vec![(3, 2)]);

        let below = binary_threshold(&f, 128, Polarity::KeepBelow);
        assert_eq!(below.count(), 47);
        assert!(!below.get(3, 2));
    }

    #[test]
    fn subtract_examples() {
        let f = Frame::from_fn(5, 4, |x, y| (x * 40 + y * 3) as u8);
        assert!(background_subtract(&f, &f)
            .unwrap()
            .pixels()
            .iter()
            .all(|&p| p == 0));
        assert_eq!(
            background_subtract(&f, &Frame::filled(5, 4, 0)).unwrap(),
            f
        );
        assert!(matches!(
            background_subtract(&f, &Frame::filled(4, 4, 0)),
            Err(PreprocessError::DimensionMismatch { .. })
        ));
    }
}
