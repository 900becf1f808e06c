//! Grayscale frames and frame sequences.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("frame dimensions must be at least 1x1, got {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("frame has {actual} samples, expected {expected}")]
    SampleCount { expected: usize, actual: usize },
    #[error("sample {index} = {value} is outside [0, 1]")]
    SampleRange { index: usize, value: f64 },
    #[error("empty sequence")]
    EmptySequence,
    #[error("frame {index} is {width}x{height}, sequence is {expected_width}x{expected_height}")]
    MixedDimensions {
        index: usize,
        width: usize,
        height: usize,
        expected_width: usize,
        expected_height: usize,
    },
    #[error("meta fps must be finite and positive, got {0}")]
    MetaFps(f64),
    #[error("phyfps label must be finite and >= 2, got {0}")]
    Label(f64),
}

/// One luminance plane, row-major, samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::ZeroDimension { width, height });
        }
        if samples.len() != width * height {
            return Err(FrameError::SampleCount {
                expected: width * height,
                actual: samples.len(),
            });
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(0.0..=1.0).contains(*s))
        {
            return Err(FrameError::SampleRange { index, value });
        }
        Ok(Frame {
            width,
            height,
            samples,
        })
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel, clamping into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be nonzero");
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(clamp_unit(f(x, y)));
            }
        }
        Frame {
            width,
            height,
            samples,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    /// Internal constructor for samples already known to lie in `[0, 1]`.
    pub(crate) fn from_samples_unchecked(width: usize, height: usize, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), width * height);
        Frame {
            width,
            height,
            samples,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// `self + alpha * (other - self)`, per pixel. `alpha == 0` returns an exact copy.
    pub fn blend(&self, other: &Frame, alpha: f64) -> Frame {
        debug_assert_eq!(self.samples.len(), other.samples.len());
        if alpha == 0.0 {
            return self.clone();
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| clamp_unit(a + alpha * (b - a)))
            .collect();
        Frame::from_samples_unchecked(self.width, self.height, samples)
    }

    /// 8-bit quantization with round-half-up.
    pub fn quantized(&self) -> Vec<u8> {
        self.samples.iter().map(|&s| quantize(s)).collect()
    }
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// `round(s * 255)` with halves rounded up.
#[inline]
pub fn quantize(s: f64) -> u8 {
    (s * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Ordered frames with container metadata and an optional ground-truth PhyFPS label.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    meta_fps: f64,
    phy_fps_label: Option<f64>,
    source_id: String,
}

/// Lowest admissible ground-truth label.
pub const MIN_LABEL_FPS: f64 = 2.0;

impl FrameSequence {
    pub fn new(
        frames: Vec<Frame>,
        meta_fps: f64,
        phy_fps_label: Option<f64>,
        source_id: impl Into<String>,
    ) -> Result<Self, FrameError> {
        let first = frames.first().ok_or(FrameError::EmptySequence)?;
        let (w, h) = (first.width, first.height);
        for (index, f) in frames.iter().enumerate() {
            if f.width != w || f.height != h {
                return Err(FrameError::MixedDimensions {
                    index,
                    width: f.width,
                    height: f.height,
                    expected_width: w,
                    expected_height: h,
                });
            }
        }
        if !(meta_fps.is_finite() && meta_fps > 0.0) {
            return Err(FrameError::MetaFps(meta_fps));
        }
        if let Some(label) = phy_fps_label {
            if !(label.is_finite() && label >= MIN_LABEL_FPS) {
                return Err(FrameError::Label(label));
            }
        }
        Ok(FrameSequence {
            frames,
            meta_fps,
            phy_fps_label,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false for a constructed sequence; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn meta_fps(&self) -> f64 {
        self.meta_fps
    }

    pub fn phy_fps_label(&self) -> Option<f64> {
        self.phy_fps_label
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    /// Replaces the container rate and label without touching frames.
    pub fn relabeled(&self, meta_fps: f64, phy_fps_label: Option<f64>) -> Result<Self, FrameError> {
        FrameSequence::new(
            self.frames.clone(),
            meta_fps,
            phy_fps_label,
            self.source_id.clone(),
        )
    }

    /// Frames `[start, start + len)` as a new sequence with the same metadata.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self, FrameError> {
        let end = (start + len).min(self.frames.len());
        let frames = self.frames.get(start..end).unwrap_or(&[]).to_vec();
        FrameSequence::new(
            frames,
            self.meta_fps,
            self.phy_fps_label,
            self.source_id.clone(),
        )
    }

    /// Keeps the first `len` frames.
    pub(crate) fn truncate(&mut self, len: usize) {
        self.frames.truncate(len.max(1));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_rejects_bad_input() {
        assert!(matches!(
            Frame::new(0, 2, vec![]),
            Err(FrameError::ZeroDimension { .. })
        ));
        assert!(matches!(
            Frame::new(2, 2, vec![0.0; 3]),
            Err(FrameError::SampleCount { .. })
        ));
        assert!(matches!(
            Frame::new(1, 1, vec![1.5]),
            Err(FrameError::SampleRange { .. })
        ));
        assert!(matches!(
            Frame::new(1, 1, vec![f64::NAN]),
            Err(FrameError::SampleRange { .. })
        ));
    }

    #[test]
    fn sequence_invariants() {
        let a = Frame::filled(2, 2, 0.1);
        let b = Frame::filled(3, 2, 0.1);
        assert_eq!(
            FrameSequence::new(vec![], 24.0, None, "x"),
            Err(FrameError::EmptySequence)
        );
        assert!(matches!(
            FrameSequence::new(vec![a.clone(), b], 24.0, None, "x"),
            Err(FrameError::MixedDimensions { index: 1, .. })
        ));
        assert_eq!(
            FrameSequence::new(vec![a.clone()], 24.0, Some(1.5), "x"),
            Err(FrameError::Label(1.5))
        );
        assert_eq!(
            FrameSequence::new(vec![a], 0.0, None, "x"),
            Err(FrameError::MetaFps(0.0))
        );
    }

    #[test]
    fn quantization_endpoints_and_half() {
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.5), 128);
    }

    #[test]
    fn blend_zero_alpha_is_copy() {
        let a = Frame::from_fn(3, 3, |x, y| (x + y) as f64 / 7.0);
        let b = Frame::filled(3, 3, 1.0);
        assert_eq!(a.blend(&b, 0.0), a);
        let mid = a.blend(&b, 0.5);
        assert!((mid.at(0, 0) - 0.5).abs() < 1e-15);
    }
}
