use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{KeyboardLayout, Lexicon};
use crate::screen::ScreenPoint;

/// Points per resampled path.
pub const RESAMPLE_POINTS: usize = 32;
/// Weight of the log-frequency term in the score.
pub const FREQUENCY_WEIGHT: f64 = 0.2;
/// Candidates returned.
pub const TOP_K: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("gaze path is empty")]
    EmptyPath,
    #[error("anchor {0:?} is not a letter key")]
    NotALetter(char),
    #[error("no lexicon word starts with {0:?}")]
    NoCandidates(char),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub word: String,
    /// Lower is better.
    pub score: f64,
}

/// Resamples a polyline to `n` points equally spaced by arc length. A path of
/// zero length becomes `n` copies of its first point.
pub fn resample_path(path: &[ScreenPoint], n: usize) -> Vec<ScreenPoint> {
    let Some(&first) = path.first() else {
        return Vec::new();
    };
    let seg: Vec<f64> = path.windows(2).map(|w| w[0].distance(w[1])).collect();
    let total: f64 = seg.iter().sum();
    if total == 0.0 || n < 2 {
        return vec![first; n];
    }
    let mut out = Vec::with_capacity(n);
    let (mut i, mut walked) = (0, 0.0);
    for k in 0..n {
        let target = total * k as f64 / (n - 1) as f64;
        while i < seg.len() - 1 && walked + seg[i] < target {
            walked += seg[i];
            i += 1;
        }
        let f = if seg[i] > 0.0 {
            ((target - walked) / seg[i]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(path[i].lerp(path[i + 1], f));
    }
    out
}

/// Dynamic time warping with Euclidean point cost, steps (1,0), (0,1), (1,1).
pub fn dtw_distance(a: &[ScreenPoint], b: &[ScreenPoint]) -> f64 {
    dtw_bounded(a, b, f64::INFINITY).unwrap_or(f64::INFINITY)
}

/// Returns `None` as soon as every cell of a row exceeds `bound`, since costs
/// are non-negative and the final distance can only be larger.
fn dtw_bounded(a: &[ScreenPoint], b: &[ScreenPoint], bound: f64) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![f64::INFINITY; m];
    for (i, pa) in a.iter().enumerate() {
        let mut row_min = f64::INFINITY;
        for j in 0..m {
            let cost = pa.distance(b[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let up = prev[j];
                let left = if j > 0 { cur[j - 1] } else { f64::INFINITY };
                let diag = if j > 0 { prev[j - 1] } else { f64::INFINITY };
                up.min(left).min(diag)
            };
            cur[j] = cost + best;
            row_min = row_min.min(cur[j]);
        }
        if row_min > bound {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Some(prev[m - 1])
}

struct Template {
    word: String,
    points: Vec<ScreenPoint>,
    penalty: f64,
}

/// Lexicon templates prepared against one layout.
pub struct WordDecoder {
    key_width: f64,
    by_letter: Vec<Vec<Template>>,
}

impl WordDecoder {
    pub fn new(layout: &KeyboardLayout, lexicon: &Lexicon) -> Self {
        let weights = lexicon.entries().iter().map(|e| e.weight);
        let fmax = weights.clone().fold(f64::NEG_INFINITY, f64::max);
        let fmin = weights.fold(f64::INFINITY, f64::min);
        let span = (fmax / fmin).ln();
        let mut by_letter: Vec<Vec<Template>> = (0..26).map(|_| Vec::new()).collect();
        for e in lexicon.entries() {
            let centers: Vec<ScreenPoint> = e
                .word
                .chars()
                .map(|c| layout.letter_center(c).expect("layouts hold every letter"))
                .collect();
            let penalty = if span > 0.0 {
                FREQUENCY_WEIGHT * (fmax / e.weight).ln() / span
            } else {
                0.0
            };
            let first = e.word.as_bytes()[0] - b'a';
            by_letter[first as usize].push(Template {
                word: e.word.clone(),
                points: resample_path(&centers, RESAMPLE_POINTS),
                penalty,
            });
        }
        Self {
            key_width: layout.key_width(),
            by_letter,
        }
    }

    /// Top candidates in ascending score order. Ties keep lexicon order.
    pub fn decode(&self, path: &[ScreenPoint], anchor: char) -> Result<Vec<Candidate>, DecodeError> {
        if path.is_empty() {
            return Err(DecodeError::EmptyPath);
        }
        if !anchor.is_ascii_lowercase() {
            return Err(DecodeError::NotALetter(anchor));
        }
        let templates = &self.by_letter[(anchor as u8 - b'a') as usize];
        if templates.is_empty() {
            return Err(DecodeError::NoCandidates(anchor));
        }
        let observed = resample_path(path, RESAMPLE_POINTS);
        let norm = RESAMPLE_POINTS as f64 * self.key_width;
        // (score, position in lexicon order)
        let mut top: Vec<(f64, usize)> = Vec::with_capacity(TOP_K + 1);
        for (idx, t) in templates.iter().enumerate() {
            let worst = if top.len() == TOP_K {
                top[TOP_K - 1].0
            } else {
                f64::INFINITY
            };
            let Some(d) = dtw_bounded(&observed, &t.points, (worst - t.penalty) * norm) else {
                continue;
            };
            let score = d / norm + t.penalty;
            let pos = top.partition_point(|&(s, _)| s <= score);
            if pos < TOP_K {
                top.insert(pos, (score, idx));
                top.truncate(TOP_K);
            }
        }
        Ok(top
            .into_iter()
            .map(|(score, idx)| Candidate {
                word: templates[idx].word.clone(),
                score,
            })
            .collect())
    }
}

/// One-shot convenience over [`WordDecoder`].
pub fn decode_word(
    path: &[ScreenPoint],
    anchor_key: char,
    layout: &KeyboardLayout,
    lexicon: &Lexicon,
) -> Result<Vec<Candidate>, DecodeError> {
    WordDecoder::new(layout, lexicon).decode(path, anchor_key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screen::ScreenSize;

    fn layout() -> KeyboardLayout {
        KeyboardLayout::qwerty(ScreenSize::new(1080, 1920))
    }

    fn centers(l: &KeyboardLayout, w: &str) -> Vec<ScreenPoint> {
        w.chars().map(|c| l.letter_center(c).unwrap()).collect()
    }

    #[test]
    fn resample_is_uniform() {
        let p = [ScreenPoint::new(0.0, 0.0), ScreenPoint::new(31.0, 0.0)];
        let r = resample_path(&p, 32);
        for (k, q) in r.iter().enumerate() {
            assert!((q.x - k as f64).abs() < 1e-12);
        }
        let bent = [
            ScreenPoint::new(0.0, 0.0),
            ScreenPoint::new(10.0, 0.0),
            ScreenPoint::new(10.0, 0.0),
            ScreenPoint::new(10.0, 10.0),
        ];
        let r = resample_path(&bent, 3);
        assert_eq!(r[1], ScreenPoint::new(10.0, 0.0));
        assert_eq!(r[2], ScreenPoint::new(10.0, 10.0));
        assert_eq!(resample_path(&bent[..1], 4), vec![ScreenPoint::new(0.0, 0.0); 4]);
    }

    #[test]
    fn dtw_basics() {
        let a = [ScreenPoint::new(0.0, 0.0), ScreenPoint::new(1.0, 0.0)];
        assert_eq!(dtw_distance(&a, &a), 0.0);
        let b = [ScreenPoint::new(0.0, 0.0), ScreenPoint::new(1.0, 0.0), ScreenPoint::new(1.0, 0.0)];
        assert_eq!(dtw_distance(&a, &b), 0.0);
        let c = [ScreenPoint::new(0.0, 3.0), ScreenPoint::new(1.0, 3.0)];
        assert_eq!(dtw_distance(&a, &c), 6.0);
    }

    #[test]
    fn hi_ranks_first() {
        let l = layout();
        let lex = Lexicon::uniform(&["hi", "he", "ha", "hit"]).unwrap();
        let got = decode_word(&centers(&l, "hi"), 'h', &l, &lex).unwrap();
        assert_eq!(got[0].word, "hi");
        assert_eq!(got.len(), 4);
        assert!(got.windows(2).all(|w| w[0].score <= w[1].score));
    }

    #[test]
    fn single_letter_self_match() {
        let l = layout();
        let lex = Lexicon::uniform(&["as", "a", "an"]).unwrap();
        let got = decode_word(&[l.letter_center('a').unwrap()], 'a', &l, &lex).unwrap();
        assert_eq!(got[0].word, "a");
        assert_eq!(got[0].score, 0.0);
    }

    #[test]
    fn errors() {
        let l = layout();
        let lex = Lexicon::uniform(&["hi"]).unwrap();
        assert_eq!(decode_word(&[], 'h', &l, &lex), Err(DecodeError::EmptyPath));
        let p = [ScreenPoint::new(0.0, 0.0)];
        assert_eq!(decode_word(&p, 'z', &l, &lex), Err(DecodeError::NoCandidates('z')));
        assert_eq!(decode_word(&p, 'H', &l, &lex), Err(DecodeError::NotALetter('H')));
    }

    #[test]
    fn frequency_breaks_shape_ties() {
        let l = layout();
        // "for" and "four" trace the same polyline on qwerty.
        let lex = Lexicon::new(vec![
            super::super::LexiconEntry { word: "four".into(), weight: 1.0 },
            super::super::LexiconEntry { word: "for".into(), weight: 50.0 },
        ])
        .unwrap();
        let got = decode_word(&centers(&l, "four"), 'f', &l, &lex).unwrap();
        assert_eq!(got[0].word, "for");
        assert!((got[1].score - FREQUENCY_WEIGHT).abs() < 1e-9);
    }
}
