//! Temporal resampling: linear upsampling to a high rate and the three
//! camera-mechanics downsamplers (sharp capture, motion blur, rolling shutter).
//!
//! All transforms index the high-rate source at `floor(k * N)` where
//! `N = f_high / f_low` may be non-integer. Averaging happens in `f64`; any
//! 8-bit quantization is deferred to storage.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{clamp_unit, Frame, FrameError, FrameSequence};

/// Wide rate grid, 2 to 240 FPS.
pub const VC_WIDE: [f64; 18] = [
    2.0, 5.0, 10.0, 12.0, 15.0, 18.0, 20.0, 24.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 60.0, 90.0,
    120.0, 240.0,
];

/// Consumer/web rate grid.
pub const VC_COMMON: [f64; 12] = [
    12.0, 15.0, 18.0, 20.0, 24.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 60.0,
];

pub const DEFAULT_HIGH_FPS: f64 = 240.0;
pub const DEFAULT_CLIP_LEN: usize = 128;

const SNAP_EPS: f64 = 1e-9;

/// `floor(x)`, treating values within 1e-9 below an integer as that integer.
pub(crate) fn snap_floor(x: f64) -> usize {
    snap(x).floor().max(0.0) as usize
}

pub(crate) fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP_EPS {
        r
    } else {
        x
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResampleError {
    #[error("invalid resample spec: {0}")]
    InvalidSpec(String),
    #[error("f_low {f_low} exceeds f_high {f_high}")]
    LowAboveHigh { f_high: f64, f_low: f64 },
    #[error("input runs at {actual} fps but spec expects f_high = {expected}")]
    RateMismatch { expected: f64, actual: f64 },
    #[error("{called} called with a {actual:?} spec")]
    StrategyMismatch {
        called: &'static str,
        actual: Strategy,
    },
    #[error("sampling window overruns the {frames}-frame source for every output index")]
    EmptyOutput { frames: usize },
    #[error("upsample target {target} fps is below the source rate {source_fps}")]
    TargetBelowSource { target: f64, source_fps: f64 },
    #[error("upsampling needs at least 2 frames")]
    SingleFrame,
    #[error("dataset needs at least one {0}")]
    EmptyDataset(&'static str),
    #[error("rate {0} is not on the supported rate grid")]
    RateNotInGrid(f64),
    #[error("rate {rate} exceeds source {source_id} rate {source_fps}")]
    RateAboveSource {
        rate: f64,
        source_fps: f64,
        source_id: String,
    },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Sharp,
    Blur,
    RollingShutter,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Sharp, Strategy::Blur, Strategy::RollingShutter];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Sharp => "sharp",
            Strategy::Blur => "blur",
            Strategy::RollingShutter => "rolling_shutter",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sharp" => Ok(Strategy::Sharp),
            "blur" => Ok(Strategy::Blur),
            "rolling_shutter" | "rolling-shutter" | "rs" => Ok(Strategy::RollingShutter),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

/// One augmentation variant: strategy, rates and exposure/readout divisor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleSpec {
    pub strategy: Strategy,
    pub f_high: f64,
    pub f_low: f64,
    pub window_divisor: u32,
}

impl ResampleSpec {
    pub fn new(
        strategy: Strategy,
        f_high: f64,
        f_low: f64,
        window_divisor: u32,
    ) -> Result<Self, ResampleError> {
        let spec = ResampleSpec {
            strategy,
            f_high,
            f_low,
            window_divisor,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ResampleError> {
        if !(self.f_high.is_finite() && self.f_high > 0.0) {
            return Err(ResampleError::InvalidSpec(format!("f_high {}", self.f_high)));
        }
        if !(self.f_low.is_finite() && self.f_low > 0.0) {
            return Err(ResampleError::InvalidSpec(format!("f_low {}", self.f_low)));
        }
        if self.f_low > self.f_high {
            return Err(ResampleError::LowAboveHigh {
                f_high: self.f_high,
                f_low: self.f_low,
            });
        }
        if ![1, 2, 4].contains(&self.window_divisor) {
            return Err(ResampleError::InvalidSpec(format!(
                "window divisor {} not in {{1, 2, 4}}",
                self.window_divisor
            )));
        }
        Ok(())
    }

    /// Downsampling ratio `N = f_high / f_low`.
    pub fn ratio(&self) -> f64 {
        self.f_high / self.f_low
    }

    /// Exposure / readout window `M = max(1, round(N / divisor))`.
    pub fn window(&self) -> usize {
        ((self.ratio() / self.window_divisor as f64).round() as usize).max(1)
    }

    /// High-rate index `floor(k * N)` of output frame `k`.
    pub fn source_index(&self, k: usize) -> usize {
        snap_floor(k as f64 * self.f_high / self.f_low)
    }

    /// Last high-rate offset touched relative to `floor(k * N)` for an image `width` wide.
    fn extent(&self, width: usize) -> usize {
        match self.strategy {
            Strategy::Sharp => 0,
            Strategy::Blur => self.window() - 1,
            Strategy::RollingShutter => self.window() * (width - 1) / width,
        }
    }

    /// Number of output frames producible from `source_len` high-rate frames.
    pub fn output_len(&self, source_len: usize, width: usize) -> usize {
        let extent = self.extent(width);
        let mut k = 0;
        while self.source_index(k) + extent < source_len {
            k += 1;
        }
        k
    }
}

fn check_input(high: &FrameSequence, spec: &ResampleSpec) -> Result<usize, ResampleError> {
    spec.validate()?;
    let rel = (high.meta_fps() - spec.f_high).abs() / spec.f_high;
    if rel > 1e-9 {
        return Err(ResampleError::RateMismatch {
            expected: spec.f_high,
            actual: high.meta_fps(),
        });
    }
    let k = spec.output_len(high.len(), high.width());
    if k == 0 {
        return Err(ResampleError::EmptyOutput { frames: high.len() });
    }
    Ok(k)
}

fn finish(
    high: &FrameSequence,
    spec: &ResampleSpec,
    frames: Vec<Frame>,
) -> Result<FrameSequence, ResampleError> {
    Ok(FrameSequence::new(
        frames,
        spec.f_low,
        Some(spec.f_low),
        high.source_id(),
    )?)
}

fn require(spec: &ResampleSpec, want: Strategy, called: &'static str) -> Result<(), ResampleError> {
    if spec.strategy != want {
        return Err(ResampleError::StrategyMismatch {
            called,
            actual: spec.strategy,
        });
    }
    Ok(())
}

/// Fast shutter: output frame `k` is a copy of high-rate frame `floor(k * N)`.
pub fn sharp_capture(high: &FrameSequence, spec: &ResampleSpec) -> Result<FrameSequence, ResampleError> {
    require(spec, Strategy::Sharp, "sharp_capture")?;
    let count = check_input(high, spec)?;
    let frames = (0..count)
        .map(|k| high.frames()[spec.source_index(k)].clone())
        .collect();
    finish(high, spec, frames)
}

/// Exposure integration: mean of `M` consecutive high-rate frames from `floor(k * N)`.
pub fn motion_blur(high: &FrameSequence, spec: &ResampleSpec) -> Result<FrameSequence, ResampleError> {
    require(spec, Strategy::Blur, "motion_blur")?;
    let count = check_input(high, spec)?;
    let m = spec.window();
    let (w, h) = (high.width(), high.height());
    let frames = (0..count)
        .map(|k| {
            let start = spec.source_index(k);
            let window = &high.frames()[start..start + m];
            if m == 1 {
                return window[0].clone();
            }
            let mut acc = vec![0.0; w * h];
            for f in window {
                for (a, s) in acc.iter_mut().zip(f.samples()) {
                    *a += s;
                }
            }
            let inv = m as f64;
            let samples = acc.into_iter().map(|a| clamp_unit(a / inv)).collect();
            Frame::from_samples_unchecked(w, h, samples)
        })
        .collect();
    finish(high, spec, frames)
}

/// Column-sequential readout: column `x` of output `k` comes from
/// high-rate frame `floor(k * N) + floor(M * x / W)`.
pub fn rolling_shutter(high: &FrameSequence, spec: &ResampleSpec) -> Result<FrameSequence, ResampleError> {
    require(spec, Strategy::RollingShutter, "rolling_shutter")?;
    let count = check_input(high, spec)?;
    let m = spec.window();
    let (w, h) = (high.width(), high.height());
    let frames = (0..count)
        .map(|k| {
            let start = spec.source_index(k);
            let mut samples = vec![0.0; w * h];
            for x in 0..w {
                let src = &high.frames()[start + m * x / w];
                for y in 0..h {
                    samples[y * w + x] = src.at(x, y);
                }
            }
            Frame::from_samples_unchecked(w, h, samples)
        })
        .collect();
    finish(high, spec, frames)
}

/// Dispatches on `spec.strategy`.
pub fn resample(high: &FrameSequence, spec: &ResampleSpec) -> Result<FrameSequence, ResampleError> {
    match spec.strategy {
        Strategy::Sharp => sharp_capture(high, spec),
        Strategy::Blur => motion_blur(high, spec),
        Strategy::RollingShutter => rolling_shutter(high, spec),
    }
}

/// Linear temporal blending up to `f_target`.
///
/// Output frame `j` sits at `t = j / f_target`; with `x = t * f_in`,
/// `k = floor(x)` and `alpha = x - k` it is `(1 - alpha) I_k + alpha I_{k+1}`,
/// holding the last frame at the boundary.
pub fn upsample_linear(seq: &FrameSequence, f_target: f64) -> Result<FrameSequence, ResampleError> {
    let f_in = seq.meta_fps();
    if !(f_target.is_finite() && f_target >= f_in) {
        return Err(ResampleError::TargetBelowSource {
            target: f_target,
            source_fps: f_in,
        });
    }
    if seq.len() < 2 {
        return Err(ResampleError::SingleFrame);
    }
    let last = seq.len() - 1;
    let count = snap_floor(last as f64 * f_target / f_in) + 1;
    let frames = (0..count)
        .map(|j| {
            let x = snap(j as f64 * f_in / f_target);
            let k = x.floor() as usize;
            if k >= last {
                return seq.frames()[last].clone();
            }
            seq.frames()[k].blend(&seq.frames()[k + 1], x - k as f64)
        })
        .collect();
    Ok(FrameSequence::new(
        frames,
        f_target,
        Some(f_target),
        seq.source_id(),
    )?)
}

/// How a dataset entry was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Original,
    Sharp,
    Blur,
    RollingShutter,
}

impl From<Strategy> for VariantKind {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Sharp => VariantKind::Sharp,
            Strategy::Blur => VariantKind::Blur,
            Strategy::RollingShutter => VariantKind::RollingShutter,
        }
    }
}

impl VariantKind {
    pub fn name(self) -> &'static str {
        match self {
            VariantKind::Original => "original",
            VariantKind::Sharp => "sharp",
            VariantKind::Blur => "blur",
            VariantKind::RollingShutter => "rolling_shutter",
        }
    }
}

/// One manifest row. `output_path` is filled in by whoever writes the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantInfo {
    #[serde(default)]
    pub output_path: String,
    pub source_id: String,
    pub strategy: VariantKind,
    pub f_high: f64,
    pub f_low: f64,
    pub window_divisor: u32,
    pub phy_fps_label: f64,
    pub frame_count: usize,
}

#[derive(Debug, Clone)]
pub struct DatasetEntry {
    pub info: VariantInfo,
    pub sequence: FrameSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub rates: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub window_divisors: Vec<u32>,
    pub clip_len: usize,
    pub retain_sources: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            rates: VC_COMMON.to_vec(),
            strategies: Strategy::ALL.to_vec(),
            window_divisors: vec![1, 2, 4],
            clip_len: DEFAULT_CLIP_LEN,
            retain_sources: true,
        }
    }
}

fn format_rate(r: f64) -> String {
    if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

/// Emits every (source, rate, strategy, divisor) variant cut to `clip_len`
/// frames, plus each untouched source when `retain_sources` is set.
///
/// Sharp capture ignores the divisor and is emitted once per rate.
/// Variants that cannot reach `clip_len` frames are dropped. Output is
/// sorted by (source id, rate, kind, divisor).
pub fn build_dataset(
    sources: &[FrameSequence],
    config: &DatasetConfig,
) -> Result<Vec<DatasetEntry>, ResampleError> {
    if sources.is_empty() {
        return Err(ResampleError::EmptyDataset("source"));
    }
    if config.rates.is_empty() {
        return Err(ResampleError::EmptyDataset("rate"));
    }
    if config.clip_len == 0 {
        return Err(ResampleError::InvalidSpec("clip_len must be positive".into()));
    }
    for &r in &config.rates {
        if !VC_WIDE.contains(&r) {
            return Err(ResampleError::RateNotInGrid(r));
        }
    }

    let mut order: Vec<&FrameSequence> = sources.iter().collect();
    order.sort_by(|a, b| a.source_id().cmp(b.source_id()));
    let mut rates = config.rates.clone();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    let mut strategies = config.strategies.clone();
    strategies.sort();
    strategies.dedup();
    let mut divisors = config.window_divisors.clone();
    divisors.sort();
    divisors.dedup();

    let mut tasks: Vec<(&FrameSequence, Option<ResampleSpec>)> = Vec::new();
    for src in order {
        let f_high = src.meta_fps();
        let mut per_source = Vec::new();
        for &rate in &rates {
            if rate > f_high {
                return Err(ResampleError::RateAboveSource {
                    rate,
                    source_fps: f_high,
                    source_id: src.source_id().to_string(),
                });
            }
            for &strategy in &strategies {
                let divs: &[u32] = if strategy == Strategy::Sharp { &[1] } else { &divisors };
                for &d in divs {
                    per_source.push(Some(ResampleSpec::new(strategy, f_high, rate, d)?));
                }
            }
        }
        if config.retain_sources {
            per_source.push(None);
        }
        tasks.extend(per_source.into_iter().map(|s| (src, s)));
    }

    let produced: Vec<Option<DatasetEntry>> = tasks
        .par_iter()
        .map(|(src, spec)| make_variant(src, spec.as_ref(), config.clip_len))
        .collect::<Result<_, _>>()?;

    let mut out: Vec<DatasetEntry> = produced.into_iter().flatten().collect();
    out.sort_by(|a, b| {
        a.info
            .source_id
            .cmp(&b.info.source_id)
            .then(a.info.f_low.total_cmp(&b.info.f_low))
            .then(a.info.strategy.cmp(&b.info.strategy))
            .then(a.info.window_divisor.cmp(&b.info.window_divisor))
    });
    Ok(out)
}

fn make_variant(
    src: &FrameSequence,
    spec: Option<&ResampleSpec>,
    clip_len: usize,
) -> Result<Option<DatasetEntry>, ResampleError> {
    let f_high = src.meta_fps();
    let (kind, f_low, divisor) = match spec {
        Some(s) => (VariantKind::from(s.strategy), s.f_low, s.window_divisor),
        None => (VariantKind::Original, f_high, 1),
    };
    if let Some(s) = spec {
        if s.output_len(src.len(), src.width()) < clip_len {
            return Ok(None);
        }
    } else if src.len() < clip_len {
        return Ok(None);
    }
    let mut seq = match spec {
        Some(s) => resample(src, s)?,
        None => src.relabeled(f_high, Some(src.phy_fps_label().unwrap_or(f_high)))?,
    };
    seq.truncate(clip_len);
    let label = seq.phy_fps_label().unwrap_or(f_low);
    let id = match kind {
        VariantKind::Original => format!("{}_original_{}", src.source_id(), format_rate(f_low)),
        _ => format!(
            "{}_{}_{}_m{}",
            src.source_id(),
            kind.name(),
            format_rate(f_low),
            divisor
        ),
    };
    let seq = seq.with_source_id(id);
    Ok(Some(DatasetEntry {
        info: VariantInfo {
            output_path: String::new(),
            source_id: src.source_id().to_string(),
            strategy: kind,
            f_high,
            f_low,
            window_divisor: divisor,
            phy_fps_label: label,
            frame_count: seq.len(),
        },
        sequence: seq,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(len: usize, fps: f64, w: usize, h: usize) -> FrameSequence {
        let frames = (0..len)
            .map(|t| Frame::from_fn(w, h, |x, y| ((t * 7 + x * 3 + y) % 17) as f64 / 16.0))
            .collect();
        FrameSequence::new(frames, fps, Some(fps), "ramp").unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            ResampleSpec::new(Strategy::Sharp, 24.0, 30.0, 1),
            Err(ResampleError::LowAboveHigh { .. })
        ));
        assert!(ResampleSpec::new(Strategy::Blur, 240.0, 24.0, 3).is_err());
        let s = ResampleSpec::new(Strategy::Blur, 240.0, 18.0, 4).unwrap();
        assert_eq!(s.window(), 3);
        let s = ResampleSpec::new(Strategy::Blur, 240.0, 240.0, 4).unwrap();
        assert_eq!(s.window(), 1);
    }

    #[test]
    fn sharp_identity_ratio() {
        let seq = ramp(10, 30.0, 3, 2);
        let spec = ResampleSpec::new(Strategy::Sharp, 30.0, 30.0, 1).unwrap();
        assert_eq!(sharp_capture(&seq, &spec).unwrap().frames(), seq.frames());
    }

    #[test]
    fn sharp_integer_ratio() {
        let seq = ramp(240, 240.0, 2, 2);
        let spec = ResampleSpec::new(Strategy::Sharp, 240.0, 24.0, 1).unwrap();
        let out = sharp_capture(&seq, &spec).unwrap();
        assert_eq!(out.len(), 24);
        assert_eq!(out.meta_fps(), 24.0);
        assert_eq!(out.phy_fps_label(), Some(24.0));
        for (k, f) in out.frames().iter().enumerate() {
            assert_eq!(f, &seq.frames()[10 * k]);
        }
    }

    #[test]
    fn sharp_fractional_ratio_indices() {
        let spec = ResampleSpec::new(Strategy::Sharp, 240.0, 18.0, 1).unwrap();
        let got: Vec<usize> = (0..5).map(|k| spec.source_index(k)).collect();
        assert_eq!(got, vec![0, 13, 26, 40, 53]);
    }

    #[test]
    fn wrong_rate_and_strategy_rejected() {
        let seq = ramp(20, 100.0, 2, 2);
        let spec = ResampleSpec::new(Strategy::Sharp, 240.0, 24.0, 1).unwrap();
        assert!(matches!(
            sharp_capture(&seq, &spec),
            Err(ResampleError::RateMismatch { .. })
        ));
        let spec = ResampleSpec::new(Strategy::Blur, 100.0, 24.0, 1).unwrap();
        assert!(matches!(
            sharp_capture(&seq, &spec),
            Err(ResampleError::StrategyMismatch { .. })
        ));
    }

    #[test]
    fn blur_window_overrun_is_error() {
        let seq = ramp(5, 240.0, 2, 2);
        let spec = ResampleSpec::new(Strategy::Blur, 240.0, 24.0, 1).unwrap();
        assert_eq!(
            motion_blur(&seq, &spec),
            Err(ResampleError::EmptyOutput { frames: 5 })
        );
    }

    #[test]
    fn rolling_shutter_column_sources() {
        // M = 4 readout over W = 4 columns: column x of frame 0 comes from high frame x
        let frames = (0..40)
            .map(|t| Frame::filled(4, 1, t as f64 / 40.0))
            .collect();
        let seq = FrameSequence::new(frames, 240.0, None, "c").unwrap();
        let spec = ResampleSpec::new(Strategy::RollingShutter, 240.0, 60.0, 1).unwrap();
        assert_eq!(spec.window(), 4);
        let out = rolling_shutter(&seq, &spec).unwrap();
        for x in 0..4 {
            assert_eq!(out.frames()[0].at(x, 0), x as f64 / 40.0);
        }
        // largest K with floor((K-1) * 4) + floor(4 * 3 / 4) <= 39
        assert_eq!(out.len(), 10);
    }

    #[test]
    fn upsample_ramp() {
        let seq = FrameSequence::new(
            vec![Frame::filled(2, 2, 0.0), Frame::filled(2, 2, 1.0)],
            1.0,
            None,
            "r",
        )
        .unwrap();
        let up = upsample_linear(&seq, 240.0).unwrap();
        assert_eq!(up.len(), 241);
        for j in 0..240 {
            for &s in up.frames()[j].samples() {
                assert!((s - j as f64 / 240.0).abs() < 1e-9);
            }
        }
        assert_eq!(up.frames()[240], seq.frames()[1]);
        assert!(matches!(
            upsample_linear(&seq, 0.5),
            Err(ResampleError::TargetBelowSource { .. })
        ));
        let one = seq.slice(0, 1).unwrap();
        assert_eq!(upsample_linear(&one, 2.0), Err(ResampleError::SingleFrame));
    }

    #[test]
    fn dataset_enumeration() {
        let src = ramp(1300, 240.0, 2, 2).with_source_id("s");
        let cfg = DatasetConfig {
            rates: vec![24.0],
            strategies: vec![Strategy::Sharp],
            window_divisors: vec![1, 2, 4],
            clip_len: 128,
            retain_sources: true,
        };
        let out = build_dataset(std::slice::from_ref(&src), &cfg).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].info.strategy, VariantKind::Sharp);
        assert_eq!(out[0].sequence.phy_fps_label(), Some(24.0));
        assert_eq!(out[1].info.strategy, VariantKind::Original);
        assert!(out.iter().all(|e| e.sequence.len() == 128));

        // 100 producible frames < clip_len
        let short = ramp(1000, 240.0, 2, 2).with_source_id("short");
        let cfg = DatasetConfig {
            rates: vec![24.0],
            strategies: vec![Strategy::Sharp],
            window_divisors: vec![1],
            clip_len: 128,
            retain_sources: false,
        };
        assert!(build_dataset(&[short], &cfg).unwrap().is_empty());

        let cfg = DatasetConfig {
            rates: vec![23.0],
            ..DatasetConfig::default()
        };
        assert_eq!(
            build_dataset(std::slice::from_ref(&src), &cfg).unwrap_err(),
            ResampleError::RateNotInGrid(23.0)
        );
        assert_eq!(
            build_dataset(&[], &DatasetConfig::default()).unwrap_err(),
            ResampleError::EmptyDataset("source")
        );
    }
}
