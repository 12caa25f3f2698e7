//! Motion sequences and their on-disk formats.
//!
//! MOTB (little-endian): magic `MOTB`, `u32` version (1), `u32` joints,
//! `u32` frames, `u32` fps × 1000, frame-major `f32` coordinates, trailing
//! CRC32 of everything before it.
//!
//! CSV: optional `# joints=N fps=F` header, then one frame per line with
//! `N·3` comma-separated decimals.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MOTB_MAGIC: &[u8; 4] = b"MOTB";
pub const MOTB_VERSION: u32 = 1;
pub const DEFAULT_FPS: f64 = 25.0;

/// Joint positions in millimeters, frame-major: `(frame, joint, xyz)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionSequence {
    n_joints: usize,
    n_frames: usize,
    fps: f64,
    coords: Vec<f32>,
    pub label: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Motb,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("motb") => Ok(Format::Motb),
            Some("csv") => Ok(Format::Csv),
            _ => Err(Error::Input(format!("cannot infer motion format from {}", path.display()))),
        }
    }
}

impl MotionSequence {
    pub fn new(n_joints: usize, fps: f64, coords: Vec<f32>) -> Result<Self> {
        if n_joints == 0 {
            return Err(Error::Input("a motion sequence needs at least one joint".into()));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::Input(format!("fps must be positive, got {fps}")));
        }
        if !coords.len().is_multiple_of(n_joints * 3) {
            return Err(Error::Input(format!("{} values is not a whole number of {n_joints}-joint frames", coords.len())));
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite coordinate at index {i}")));
        }
        let n_frames = coords.len() / (n_joints * 3);
        Ok(Self { n_joints, n_frames, fps, coords, label: None })
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn coords(&self) -> &[f32] {
        &self.coords
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let w = self.n_joints * 3;
        &self.coords[t * w..(t + 1) * w]
    }

    /// Frames `start..start + len` as an `[N, len, 3]` tensor.
    pub fn clip(&self, start: usize, len: usize) -> Result<Tensor<f32>> {
        if len == 0 || start + len > self.n_frames {
            return Err(Error::Input(format!("frames {start}..{} outside 0..{}", start + len, self.n_frames)));
        }
        let n = self.n_joints;
        let mut data = vec![0.0; n * len * 3];
        for t in 0..len {
            let f = self.frame(start + t);
            for j in 0..n {
                data[(j * len + t) * 3..(j * len + t) * 3 + 3].copy_from_slice(&f[j * 3..j * 3 + 3]);
            }
        }
        Tensor::new(&[n, len, 3], data)
    }

    /// Sub-sequence of frames `start..start + len`.
    pub fn frames(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.n_frames {
            return Err(Error::Input(format!("frames {start}..{} outside 0..{}", start + len, self.n_frames)));
        }
        let w = self.n_joints * 3;
        let mut out = Self::new(self.n_joints, self.fps, self.coords[start * w..(start + len) * w].to_vec())?;
        out.label = self.label.clone();
        Ok(out)
    }

    /// Inverse of [`clip`](Self::clip): builds a sequence from an `[N, T, 3]` tensor.
    pub fn from_tensor(t: &Tensor<f32>, fps: f64) -> Result<Self> {
        let &[n, len, 3] = t.shape() else {
            return Err(Error::shape("from_tensor", format!("expected [N, T, 3], got {:?}", t.shape())));
        };
        let mut coords = vec![0.0; n * len * 3];
        for j in 0..n {
            for f in 0..len {
                let src = (j * len + f) * 3;
                coords[(f * n + j) * 3..(f * n + j) * 3 + 3].copy_from_slice(&t.data()[src..src + 3]);
            }
        }
        Self::new(n, fps, coords)
    }

    pub fn to_motb(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(24 + self.coords.len() * 4);
        buf.extend_from_slice(MOTB_MAGIC);
        buf.extend_from_slice(&MOTB_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.n_joints as u32).to_le_bytes());
        buf.extend_from_slice(&(self.n_frames as u32).to_le_bytes());
        buf.extend_from_slice(&((self.fps * 1000.0).round() as u32).to_le_bytes());
        for v in &self.coords {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn from_motb(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MOTB_MAGIC {
            return Err(Error::CorruptMotion { field: "magic" });
        }
        if bytes.len() < 24 {
            return Err(Error::CorruptMotion { field: "length" });
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        if word(4) != MOTB_VERSION {
            return Err(Error::CorruptMotion { field: "version" });
        }
        let (payload, trailer) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(payload) != u32::from_le_bytes(trailer.try_into().expect("4 bytes")) {
            return Err(Error::CorruptMotion { field: "checksum" });
        }
        let (n_joints, n_frames, fps_milli) = (word(8) as usize, word(12) as usize, word(16));
        let body = &payload[20..];
        if body.len() != n_joints * n_frames * 3 * 4 {
            return Err(Error::CorruptMotion { field: "length" });
        }
        if fps_milli == 0 {
            return Err(Error::CorruptMotion { field: "fps" });
        }
        let coords = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Self::new(n_joints, fps_milli as f64 / 1000.0, coords).map_err(|e| Error::Parse {
            location: "MOTB payload".into(),
            message: e.to_string(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# joints={} fps={}\n", self.n_joints, self.fps);
        for t in 0..self.n_frames {
            let mut first = true;
            for v in self.frame(t) {
                if !first {
                    out.push(',');
                }
                first = false;
                write!(out, "{v}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    /// Parses CSV text. Without a header, the joint count comes from the first
    /// row's width and fps defaults to 25.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut n_joints: Option<usize> = None;
        let mut fps = DEFAULT_FPS;
        let mut coords = Vec::new();
        let mut width: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                if width.is_some() {
                    return Err(parse_err(lineno, "header after data rows"));
                }
                for field in header.split_whitespace() {
                    let (k, v) = field.split_once('=').ok_or_else(|| parse_err(lineno, &format!("malformed header field {field:?}")))?;
                    match k {
                        "joints" => n_joints = Some(v.parse().map_err(|_| parse_err(lineno, &format!("bad joints value {v:?}")))?),
                        "fps" => fps = v.parse().map_err(|_| parse_err(lineno, &format!("bad fps value {v:?}")))?,
                        _ => return Err(parse_err(lineno, &format!("unknown header key {k:?}"))),
                    }
                }
                continue;
            }
            let row: Vec<&str> = line.split(',').collect();
            let expected = *width.get_or_insert_with(|| n_joints.map_or(row.len(), |n| n * 3));
            if row.len() != expected || !expected.is_multiple_of(3) {
                return Err(parse_err(lineno, &format!("expected {expected} columns (a multiple of 3), found {}", row.len())));
            }
            for (c, cell) in row.iter().enumerate() {
                let v: f32 = cell
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(lineno, &format!("column {}: not a number: {cell:?}", c + 1)))?;
                if !v.is_finite() {
                    return Err(parse_err(lineno, &format!("column {}: non-finite value", c + 1)));
                }
                coords.push(v);
            }
        }
        let width = width.ok_or_else(|| parse_err(1, "no data rows"))?;
        Self::new(width / 3, fps, coords).map_err(|e| Error::Parse { location: "CSV".into(), message: e.to_string() })
    }

    pub fn save(&self, path: impl AsRef<Path>, format: Format) -> Result<()> {
        match format {
            Format::Motb => fs::write(path, self.to_motb())?,
            Format::Csv => fs::write(path, self.to_csv())?,
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, format: Format) -> Result<Self> {
        let path = path.as_ref();
        match format {
            Format::Motb => Self::from_motb(&fs::read(path)?),
            Format::Csv => Self::from_csv(&fs::read_to_string(path)?),
        }
    }
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse { location: format!("line {line}"), message: message.to_string() }
}
