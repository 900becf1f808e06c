//! PhyFPS-guided retiming: put each source frame on its physical timeline and
//! resample that timeline at a fixed playback rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{FrameError, FrameSequence};
use crate::resample::{snap, snap_floor};

pub const DEFAULT_OUTPUT_FPS: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetimeError {
    #[error("no usable predictions (all clips motion-gated or none given)")]
    NoPredictions,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("video has {video} frames but plan covers {plan}")]
    LengthMismatch { video: usize, plan: usize },
    #[error("relabel-only correction needs a single-segment plan")]
    RelabelNeedsGlobal,
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetimeMode {
    Global,
    Dynamic,
}

impl std::str::FromStr for RetimeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" => Ok(RetimeMode::Global),
            "dynamic" => Ok(RetimeMode::Dynamic),
            other => Err(format!("unknown retime mode {other:?}")),
        }
    }
}

/// Frames `[start_frame, end_frame)` play at `rate` physical frames per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetimePlan {
    pub mode: RetimeMode,
    pub output_fps: f64,
    pub segments: Vec<Segment>,
}

/// Mean that returns the common value exactly when all inputs are equal.
fn exact_mean(xs: &[f64]) -> f64 {
    let first = xs[0];
    first + xs.iter().map(|x| x - first).sum::<f64>() / xs.len() as f64
}

impl RetimePlan {
    pub fn frame_count(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end_frame)
    }

    pub fn validate(&self) -> Result<(), RetimeError> {
        if !(self.output_fps.is_finite() && self.output_fps > 0.0) {
            return Err(RetimeError::InvalidPlan(format!(
                "output fps {} must be positive",
                self.output_fps
            )));
        }
        if self.segments.is_empty() {
            return Err(RetimeError::InvalidPlan("no segments".into()));
        }
        let mut next = 0;
        for s in &self.segments {
            if s.start_frame != next || s.end_frame <= s.start_frame {
                return Err(RetimeError::InvalidPlan(format!(
                    "segment [{}, {}) does not continue the partition at frame {next}",
                    s.start_frame, s.end_frame
                )));
            }
            if !(s.rate.is_finite() && s.rate > 0.0) {
                return Err(RetimeError::InvalidPlan(format!("rate {} must be positive", s.rate)));
            }
            next = s.end_frame;
        }
        Ok(())
    }

    /// Per-frame physical rate `r(t)`.
    pub fn rate_of(&self, frame: usize) -> Option<f64> {
        self.segments
            .iter()
            .find(|s| (s.start_frame..s.end_frame).contains(&frame))
            .map(|s| s.rate)
    }

    /// Physical duration `sum_t 1 / r(t)` in seconds.
    pub fn physical_duration(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| (s.end_frame - s.start_frame) as f64 / s.rate)
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// One segment over the whole video at the mean clip prediction.
pub fn plan_global(
    video_len: usize,
    predictions: &[Option<f64>],
    output_fps: f64,
) -> Result<RetimePlan, RetimeError> {
    let usable: Vec<f64> = predictions.iter().flatten().copied().collect();
    if usable.is_empty() || video_len == 0 {
        return Err(RetimeError::NoPredictions);
    }
    let plan = RetimePlan {
        mode: RetimeMode::Global,
        output_fps,
        segments: vec![Segment {
            start_frame: 0,
            end_frame: video_len,
            rate: exact_mean(&usable),
        }],
    };
    plan.validate()?;
    Ok(plan)
}

/// Per-frame rate = mean of predictions of every window covering the frame;
/// equal neighbours merge into segments. Gated windows contribute nothing;
/// uncovered frames take the nearest covered frame's rate.
pub fn plan_dynamic(
    video_len: usize,
    predictions: &[Option<f64>],
    window: usize,
    stride: usize,
    output_fps: f64,
) -> Result<RetimePlan, RetimeError> {
    if window == 0 || stride == 0 {
        return Err(RetimeError::InvalidPlan("window and stride must be positive".into()));
    }
    if video_len == 0 || predictions.iter().all(Option::is_none) {
        return Err(RetimeError::NoPredictions);
    }
    let mut covering: Vec<Vec<f64>> = vec![Vec::new(); video_len];
    for (c, p) in predictions.iter().enumerate() {
        let Some(f) = p else { continue };
        let start = c * stride;
        for cover in covering.iter_mut().take((start + window).min(video_len)).skip(start) {
            cover.push(*f);
        }
    }
    let mut rates: Vec<Option<f64>> = covering
        .iter()
        .map(|c| (!c.is_empty()).then(|| exact_mean(c)))
        .collect();
    let covered: Vec<usize> = (0..video_len).filter(|&t| rates[t].is_some()).collect();
    if covered.is_empty() {
        return Err(RetimeError::NoPredictions);
    }
    for t in 0..video_len {
        if rates[t].is_none() {
            let nearest = *covered
                .iter()
                .min_by_key(|&&u| (u as i64 - t as i64).unsigned_abs())
                .unwrap();
            rates[t] = rates[nearest];
        }
    }
    let mut segments: Vec<Segment> = Vec::new();
    for (t, r) in rates.into_iter().enumerate() {
        let r = r.unwrap();
        match segments.last_mut() {
            Some(s) if s.rate == r => s.end_frame = t + 1,
            _ => segments.push(Segment {
                start_frame: t,
                end_frame: t + 1,
                rate: r,
            }),
        }
    }
    let plan = RetimePlan {
        mode: RetimeMode::Dynamic,
        output_fps,
        segments,
    };
    plan.validate()?;
    Ok(plan)
}

/// Resamples `video` so it plays at `plan.output_fps` with physically correct timing.
///
/// Source frame `t` sits at `tau(t) = sum_{u<t} 1 / r(u)`; output frame `j`
/// at `j / output_fps` blends the two bracketing source frames.
pub fn apply_retime(video: &FrameSequence, plan: &RetimePlan) -> Result<FrameSequence, RetimeError> {
    plan.validate()?;
    if plan.frame_count() != video.len() {
        return Err(RetimeError::LengthMismatch {
            video: video.len(),
            plan: plan.frame_count(),
        });
    }
    let fps = plan.output_fps;
    // segment start times, in units of output frames
    let mut starts = Vec::with_capacity(plan.segments.len());
    let mut acc = 0.0;
    for s in &plan.segments {
        starts.push(acc);
        acc += (s.end_frame - s.start_frame) as f64 * fps / s.rate;
    }
    let last_seg = plan.segments.last().unwrap();
    let last_start = *starts.last().unwrap();
    let last_time = last_start + (video.len() - 1 - last_seg.start_frame) as f64 * fps / last_seg.rate;
    let count = snap_floor(last_time) + 1;
    let last = video.len() - 1;

    let mut seg = 0;
    let frames = (0..count)
        .map(|j| {
            let jf = j as f64;
            while seg + 1 < plan.segments.len() && jf >= snap(starts[seg + 1]) {
                seg += 1;
            }
            let s = &plan.segments[seg];
            let pos = snap(s.start_frame as f64 + (jf * s.rate - starts[seg] * s.rate) / fps);
            let pos = pos.clamp(0.0, last as f64);
            let k = pos.floor() as usize;
            if k >= last {
                return video.frames()[last].clone();
            }
            video.frames()[k].blend(&video.frames()[k + 1], pos - k as f64)
        })
        .collect();
    Ok(FrameSequence::new(
        frames,
        fps,
        Some(fps),
        video.source_id(),
    )?)
}

/// Container-only correction: keep frames, set meta fps to the planned rate.
pub fn relabel(video: &FrameSequence, plan: &RetimePlan) -> Result<FrameSequence, RetimeError> {
    if plan.segments.len() != 1 {
        return Err(RetimeError::RelabelNeedsGlobal);
    }
    let rate = plan.segments[0].rate;
    Ok(video.relabeled(rate, Some(rate))?)
}
