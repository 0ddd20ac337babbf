//! Newline-delimited JSON sidecars.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::EyeFeatures;
use crate::synth::GroundTruth;

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Ground truth for one frame: `{"i","du","dv","tx","ty","blink"}`, with
/// `tx`/`ty` null when the frame has no screen target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub i: u64,
    pub du: f64,
    pub dv: f64,
    pub tx: Option<f64>,
    pub ty: Option<f64>,
    pub blink: bool,
}

impl From<&GroundTruth> for TruthRecord {
    fn from(g: &GroundTruth) -> Self {
        Self {
            i: g.frame_index as u64,
            du: g.pccr_vector.x,
            dv: g.pccr_vector.y,
            tx: g.screen_target.map(|p| p.x),
            ty: g.screen_target.map(|p| p.y),
            blink: g.blink,
        }
    }
}

impl TruthRecord {
    pub fn target(&self) -> Option<crate::screen::ScreenPoint> {
        match (self.tx, self.ty) {
            (Some(x), Some(y)) => Some(crate::screen::ScreenPoint::new(x, y)),
            _ => None,
        }
    }
}

/// Measured features for one frame, nulls where a feature was not found.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub i: u64,
    pub px: Option<f64>,
    pub py: Option<f64>,
    pub gx: Option<f64>,
    pub gy: Option<f64>,
    pub du: Option<f64>,
    pub dv: Option<f64>,
    pub blink: bool,
}

impl FeatureRecord {
    pub fn new(i: u64, f: &EyeFeatures) -> Self {
        Self {
            i,
            px: f.pupil.map(|p| p.center.x),
            py: f.pupil.map(|p| p.center.y),
            gx: f.glint.map(|g| g.center.x),
            gy: f.glint.map(|g| g.center.y),
            du: f.vector.map(|v| v.du),
            dv: f.vector.map(|v| v.dv),
            blink: f.blink_observation,
        }
    }
}

pub struct NdjsonWriter<W: Write> {
    out: W,
}

impl NdjsonWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> NdjsonWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_ndjson<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> io::Result<()> {
    let mut w = NdjsonWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.finish().map(drop)
}

pub fn parse_ndjson<T: DeserializeOwned>(input: impl BufRead) -> Result<Vec<T>, SidecarError> {
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| SidecarError::Parse {
            line: k + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn read_ndjson<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, SidecarError> {
    parse_ndjson(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_line_shape() {
        let r = TruthRecord {
            i: 3,
            du: -1.0,
            dv: 0.5,
            tx: None,
            ty: None,
            blink: true,
        };
        let mut w = NdjsonWriter::new(Vec::new());
        w.write(&r).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(
            text,
            "{\"i\":3,\"du\":-1.0,\"dv\":0.5,\"tx\":null,\"ty\":null,\"blink\":true}\n"
        );
        let back: Vec<TruthRecord> = parse_ndjson(text.as_bytes()).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "{\"i\":0,\"du\":0,\"dv\":0,\"tx\":1,\"ty\":2,\"blink\":false}\n\nnot json\n";
        match parse_ndjson::<TruthRecord>(text.as_bytes()) {
            Err(SidecarError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
