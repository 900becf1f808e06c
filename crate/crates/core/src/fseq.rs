//! On-disk storage: the `.fseq` container and PGM frame directories.
//!
//! `.fseq` layout, little-endian:
//!
//! ```text
//! "FSEQ" | version u16 = 1 | width u32 | height u32 | frame_count u32
//!        | meta_fps f64 | phy_fps_label f64 (NaN = absent)
//!        | frame_count * width * height bytes, row-major
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Frame, FrameError, FrameSequence};

pub const MAGIC: &[u8; 4] = b"FSEQ";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4 + 8 + 8;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("unrecognized format: bad magic {0:?}")]
    UnrecognizedFormat([u8; 4]),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("empty sequence: header declares zero frames")]
    EmptySequence,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("invalid sequence: {0}")]
    Invalid(#[from] FrameError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Sidecar written next to a PGM frame directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PgmMeta {
    pub meta_fps: f64,
    pub phy_fps_label: Option<f64>,
}

pub fn write_fseq<W: Write>(seq: &FrameSequence, mut w: W) -> io::Result<()> {
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&(seq.width() as u32).to_le_bytes());
    header.extend_from_slice(&(seq.height() as u32).to_le_bytes());
    header.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    header.extend_from_slice(&seq.meta_fps().to_le_bytes());
    header.extend_from_slice(&seq.phy_fps_label().unwrap_or(f64::NAN).to_le_bytes());
    w.write_all(&header)?;
    for frame in seq.frames() {
        w.write_all(&frame.quantized())?;
    }
    w.flush()
}

pub fn read_fseq<R: Read>(mut r: R, source_id: &str) -> Result<FrameSequence, FormatError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_fseq(&bytes, source_id)
}

pub fn decode_fseq(bytes: &[u8], source_id: &str) -> Result<FrameSequence, FormatError> {
    if bytes.len() < 4 {
        return Err(FormatError::MalformedHeader(format!(
            "file is {} bytes, shorter than the magic",
            bytes.len()
        )));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(FormatError::UnrecognizedFormat(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::MalformedHeader(format!(
            "header needs {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());

    let version = u16_at(4);
    if version != VERSION {
        return Err(FormatError::MalformedHeader(format!(
            "unsupported version {version}"
        )));
    }
    let width = u32_at(6);
    let height = u32_at(10);
    let frame_count = u32_at(14);
    let meta_fps = f64_at(18);
    let label = f64_at(26);
    if width == 0 || height == 0 {
        return Err(FormatError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if frame_count == 0 {
        return Err(FormatError::EmptySequence);
    }
    if !(meta_fps.is_finite() && meta_fps > 0.0) {
        return Err(FormatError::MalformedHeader(format!(
            "meta fps {meta_fps} is not positive"
        )));
    }
    let frame_len = width * height;
    let expected = frame_len * frame_count;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(FormatError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(FormatError::DimensionMismatch(format!(
            "payload has {} bytes, header implies {expected} ({frame_count} x {width}x{height})",
            payload.len()
        )));
    }
    let frames = payload
        .chunks_exact(frame_len)
        .map(|chunk| {
            let samples = chunk.iter().map(|&b| b as f64 / 255.0).collect();
            Frame::from_samples_unchecked(width, height, samples)
        })
        .collect();
    let label = if label.is_nan() { None } else { Some(label) };
    Ok(FrameSequence::new(frames, meta_fps, label, source_id)?)
}

pub fn save_sequence(seq: &FrameSequence, path: &Path) -> Result<(), FormatError> {
    let file = fs::File::create(path)?;
    write_fseq(seq, io::BufWriter::new(file))?;
    Ok(())
}

/// Loads a `.fseq` file, or a directory of `frame_%06d.pgm` files plus `meta.json`.
///
/// The source id is the file stem (or directory name).
pub fn load_sequence(path: &Path) -> Result<FrameSequence, FormatError> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if path.is_dir() {
        return load_pgm_dir(path, &id);
    }
    let bytes = fs::read(path)?;
    decode_fseq(&bytes, &id)
}

fn load_pgm_dir(dir: &Path, id: &str) -> Result<FrameSequence, FormatError> {
    let meta_raw = fs::read_to_string(dir.join("meta.json"))?;
    let meta: PgmMeta = serde_json::from_str(&meta_raw)
        .map_err(|e| FormatError::MalformedHeader(format!("meta.json: {e}")))?;
    let mut frames: Vec<Frame> = Vec::new();
    loop {
        let p = dir.join(format!("frame_{:06}.pgm", frames.len()));
        if !p.exists() {
            break;
        }
        let frame = decode_pgm(&fs::read(&p)?)?;
        if let Some(first) = frames.first() {
            if (first.width(), first.height()) != (frame.width(), frame.height()) {
                return Err(FormatError::DimensionMismatch(format!(
                    "{} is {}x{}, first frame is {}x{}",
                    p.display(),
                    frame.width(),
                    frame.height(),
                    first.width(),
                    first.height()
                )));
            }
        }
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(FormatError::EmptySequence);
    }
    Ok(FrameSequence::new(
        frames,
        meta.meta_fps,
        meta.phy_fps_label,
        id,
    )?)
}

/// Decodes a binary (P5) PGM with maxval ≤ 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<Frame, FormatError> {
    let mut pos = 0usize;
    let mut next_token = || -> Result<String, FormatError> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(FormatError::MalformedHeader("PGM header ended early".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = next_token()?;
    if magic != "P5" {
        let mut m = [0u8; 4];
        for (d, s) in m.iter_mut().zip(magic.bytes()) {
            *d = s;
        }
        return Err(FormatError::UnrecognizedFormat(m));
    }
    let parse = |t: String| {
        t.parse::<usize>()
            .map_err(|_| FormatError::MalformedHeader(format!("bad PGM number {t:?}")))
    };
    let width = parse(next_token()?)?;
    let height = parse(next_token()?)?;
    let maxval = parse(next_token()?)?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 255 {
        return Err(FormatError::MalformedHeader(format!(
            "unsupported PGM {width}x{height} maxval {maxval}"
        )));
    }
    // exactly one whitespace byte separates header from raster
    let data = bytes.get(pos + 1..).unwrap_or(&[]);
    let expected = width * height;
    if data.len() < expected {
        return Err(FormatError::TruncatedPayload {
            expected,
            found: data.len(),
        });
    }
    let samples = data[..expected]
        .iter()
        .map(|&b| (b as f64 / maxval as f64).min(1.0))
        .collect();
    Ok(Frame::new(width, height, samples)?)
}
