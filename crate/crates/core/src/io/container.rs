//! `EYS1` frame stream container: a 24-byte header (magic plus five
//! little-endian u32 fields: width, height, frame_count, fps numerator, fps
//! denominator) followed by raw row-major 8-bit frames.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use thiserror::Error;

use crate::frame::Frame;

pub const MAGIC: &[u8; 4] = b"EYS1";
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not an EYS1 stream")]
    BadMagic,
    #[error("invalid header: {0}")]
    BadHeader(String),
    #[error("frame is {got_w}x{got_h}, stream is {want_w}x{want_h}")]
    FrameSize {
        want_w: u32,
        want_h: u32,
        got_w: usize,
        got_h: usize,
    },
    #[error("stream ends after {read} of {expected} frames")]
    Truncated { read: u32, expected: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContainerHeader {
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
    pub fps_num: u32,
    pub fps_den: u32,
}

impl ContainerHeader {
    pub fn fps(&self) -> f64 {
        f64::from(self.fps_num) / f64::from(self.fps_den)
    }

    /// Presentation time of frame `i`, ms.
    pub fn frame_time_ms(&self, i: u64) -> f64 {
        i as f64 * 1000.0 * f64::from(self.fps_den) / f64::from(self.fps_num)
    }

    pub fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[..4].copy_from_slice(MAGIC);
        for (k, v) in [self.width, self.height, self.frame_count, self.fps_num, self.fps_den]
            .into_iter()
            .enumerate()
        {
            b[4 + 4 * k..8 + 4 * k].copy_from_slice(&v.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(b: &[u8; HEADER_LEN]) -> Result<Self, ContainerError> {
        if &b[..4] != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        let word = |k: usize| u32::from_le_bytes(b[4 + 4 * k..8 + 4 * k].try_into().unwrap());
        let h = Self {
            width: word(0),
            height: word(1),
            frame_count: word(2),
            fps_num: word(3),
            fps_den: word(4),
        };
        if h.width == 0 || h.height == 0 {
            return Err(ContainerError::BadHeader("zero frame dimension".into()));
        }
        if h.fps_num == 0 || h.fps_den == 0 {
            return Err(ContainerError::BadHeader("zero fps term".into()));
        }
        Ok(h)
    }
}

/// Streams frames out; the frame count in the header is patched on
/// [`ContainerWriter::finish`].
pub struct ContainerWriter<W: Write + Seek> {
    out: W,
    header: ContainerHeader,
}

impl ContainerWriter<BufWriter<File>> {
    pub fn create(
        path: impl AsRef<Path>,
        width: u32,
        height: u32,
        fps_num: u32,
        fps_den: u32,
    ) -> Result<Self, ContainerError> {
        Self::new(BufWriter::new(File::create(path)?), width, height, fps_num, fps_den)
    }
}

impl<W: Write + Seek> ContainerWriter<W> {
    pub fn new(
        mut out: W,
        width: u32,
        height: u32,
        fps_num: u32,
        fps_den: u32,
    ) -> Result<Self, ContainerError> {
        let header = ContainerHeader {
            width,
            height,
            frame_count: 0,
            fps_num,
            fps_den,
        };
        ContainerHeader::from_bytes(&header.to_bytes())?;
        out.write_all(&header.to_bytes())?;
        Ok(Self { out, header })
    }

    pub fn write_frame(&mut self, frame: &Frame) -> Result<(), ContainerError> {
        if frame.width() != self.header.width as usize || frame.height() != self.header.height as usize {
            return Err(ContainerError::FrameSize {
                want_w: self.header.width,
                want_h: self.header.height,
                got_w: frame.width(),
                got_h: frame.height(),
            });
        }
        self.out.write_all(frame.pixels())?;
        self.header.frame_count = self
            .header
            .frame_count
            .checked_add(1)
            .ok_or_else(|| ContainerError::BadHeader("more than u32::MAX frames".into()))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(ContainerHeader, W), ContainerError> {
        let end = self.out.stream_position()?;
        self.out.seek(SeekFrom::Start(0))?;
        self.out.write_all(&self.header.to_bytes())?;
        self.out.seek(SeekFrom::Start(end))?;
        self.out.flush()?;
        Ok((self.header, self.out))
    }
}

pub struct ContainerReader<R: Read> {
    input: R,
    header: ContainerHeader,
    read: u32,
}

impl ContainerReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ContainerError> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> ContainerReader<R> {
    pub fn new(mut input: R) -> Result<Self, ContainerError> {
        let mut b = [0u8; HEADER_LEN];
        input.read_exact(&mut b).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => ContainerError::BadMagic,
            _ => ContainerError::Io(e),
        })?;
        Ok(Self {
            input,
            header: ContainerHeader::from_bytes(&b)?,
            read: 0,
        })
    }

    pub fn header(&self) -> &ContainerHeader {
        &self.header
    }

    /// Next frame, or `None` after `frame_count` frames.
    pub fn read_frame(&mut self) -> Result<Option<Frame>, ContainerError> {
        if self.read == self.header.frame_count {
            return Ok(None);
        }
        let mut px = vec![0u8; self.header.frame_len()];
        self.input.read_exact(&mut px).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => ContainerError::Truncated {
                read: self.read,
                expected: self.header.frame_count,
            },
            _ => ContainerError::Io(e),
        })?;
        self.read += 1;
        let frame = Frame::new(self.header.width as usize, self.header.height as usize, px)
            .expect("length matches header");
        Ok(Some(frame))
    }
}

impl<R: Read> Iterator for ContainerReader<R> {
    type Item = Result<Frame, ContainerError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_frame().transpose()
    }
}

pub fn write_container(
    path: impl AsRef<Path>,
    frames: &[Frame],
    fps_num: u32,
    fps_den: u32,
) -> Result<ContainerHeader, ContainerError> {
    let first = frames
        .first()
        .ok_or_else(|| ContainerError::BadHeader("no frames".into()))?;
    let mut w = ContainerWriter::create(path, first.width() as u32, first.height() as u32, fps_num, fps_den)?;
    for f in frames {
        w.write_frame(f)?;
    }
    Ok(w.finish()?.0)
}

pub fn read_container(path: impl AsRef<Path>) -> Result<(ContainerHeader, Vec<Frame>), ContainerError> {
    let r = ContainerReader::open(path)?;
    let header = *r.header();
    let frames = r.collect::<Result<Vec<_>, _>>()?;
    Ok((header, frames))
}
