//! Analytic synthetic scenes whose physical frame rate is known by construction.
//!
//! Every pattern moves horizontally; position is a closed-form function of
//! time, so a scene rendered at rate F has a PhyFPS of exactly F.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Frame, FrameError, FrameSequence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("duration must be finite and positive, got {0}")]
    Duration(f64),
    #[error("capture fps must be finite and >= 2, got {0}")]
    CaptureFps(f64),
    #[error("scene would have {0} frames, need at least 2")]
    TooFewFrames(usize),
    #[error("invalid scene: {0}")]
    Spec(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    TranslatingGaussianBlob,
    SinusoidalGrating,
    BouncingDisc,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [
        Pattern::TranslatingGaussianBlob,
        Pattern::SinusoidalGrating,
        Pattern::BouncingDisc,
    ];
}

impl std::str::FromStr for Pattern {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "blob" | "translating_gaussian_blob" => Ok(Pattern::TranslatingGaussianBlob),
            "grating" | "sinusoidal_grating" => Ok(Pattern::SinusoidalGrating),
            "disc" | "bouncing_disc" => Ok(Pattern::BouncingDisc),
            other => Err(format!("unknown pattern {other:?}")),
        }
    }
}

/// A moving pattern on a flat background.
///
/// `spatial_scale` is the blob sigma, grating wavelength, or disc radius.
/// The object starts at `origin_x` (defaults to the frame centre) and sits
/// vertically at `origin_y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub pattern: Pattern,
    pub velocity: f64,
    pub spatial_scale: f64,
    pub width: usize,
    pub height: usize,
    pub background: f64,
    #[serde(default)]
    pub origin_x: Option<f64>,
    #[serde(default)]
    pub origin_y: Option<f64>,
}

impl SceneSpec {
    pub fn new(pattern: Pattern, velocity: f64, spatial_scale: f64, width: usize, height: usize) -> Self {
        SceneSpec {
            pattern,
            velocity,
            spatial_scale,
            width,
            height,
            background: 0.2,
            origin_x: None,
            origin_y: None,
        }
    }

    /// Draws a random scene whose speed magnitude lies in `speed` (px/s).
    pub fn sample<R: Rng>(rng: &mut R, width: usize, height: usize, speed: (f64, f64)) -> Self {
        let pattern = Pattern::ALL[rng.gen_range(0..3)];
        let magnitude = rng.gen_range(speed.0..=speed.1);
        let velocity = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
        let spatial_scale = match pattern {
            Pattern::TranslatingGaussianBlob => rng.gen_range(2.5..5.0),
            Pattern::SinusoidalGrating => rng.gen_range(12.0..20.0),
            Pattern::BouncingDisc => rng.gen_range(4.0..8.0),
        };
        SceneSpec {
            pattern,
            velocity,
            spatial_scale,
            width,
            height,
            background: rng.gen_range(0.05..0.4),
            origin_x: Some(rng.gen_range(0.0..width as f64)),
            origin_y: Some(rng.gen_range(0.3..0.7) * height as f64),
        }
    }

    fn validate(&self) -> Result<(), SceneError> {
        if !self.velocity.is_finite() {
            return Err(SceneError::Spec(format!("velocity {} is not finite", self.velocity)));
        }
        if !(self.spatial_scale.is_finite() && self.spatial_scale > 0.0) {
            return Err(SceneError::Spec(format!(
                "spatial scale {} must be positive",
                self.spatial_scale
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::Spec("width and height must be nonzero".into()));
        }
        if !(0.0..=1.0).contains(&self.background) {
            return Err(SceneError::Spec(format!(
                "background {} outside [0, 1]",
                self.background
            )));
        }
        Ok(())
    }

    fn origin_x(&self) -> f64 {
        self.origin_x.unwrap_or(self.width as f64 / 2.0)
    }

    fn origin_y(&self) -> f64 {
        self.origin_y.unwrap_or(self.height as f64 / 2.0)
    }

    fn foreground(&self) -> f64 {
        if self.background <= 0.5 {
            1.0
        } else {
            0.0
        }
    }

    /// Analytic horizontal object position at time `t` seconds.
    ///
    /// Blob and grating positions wrap modulo the frame width (the grating
    /// returns its unwrapped phase origin). The disc reflects off the walls.
    pub fn position_at(&self, t: f64) -> f64 {
        let w = self.width as f64;
        let x = self.origin_x() + self.velocity * t;
        match self.pattern {
            Pattern::TranslatingGaussianBlob => x.rem_euclid(w),
            Pattern::SinusoidalGrating => x,
            Pattern::BouncingDisc => {
                let r = self.spatial_scale;
                let travel = w - 2.0 * r;
                if travel <= 0.0 {
                    return w / 2.0;
                }
                let p = (x - r).rem_euclid(2.0 * travel);
                r + if p <= travel { p } else { 2.0 * travel - p }
            }
        }
    }

    /// Renders the scene at time `t` seconds.
    pub fn render_at(&self, t: f64) -> Frame {
        let bg = self.background;
        let fg = self.foreground();
        let w = self.width as f64;
        let cx = self.position_at(t);
        let cy = self.origin_y();
        let scale = self.spatial_scale;
        match self.pattern {
            Pattern::TranslatingGaussianBlob => {
                let inv = 1.0 / (2.0 * scale * scale);
                Frame::from_fn(self.width, self.height, |x, y| {
                    let mut dx = x as f64 - cx;
                    dx -= w * (dx / w).round();
                    let dy = y as f64 - cy;
                    bg + (fg - bg) * (-(dx * dx + dy * dy) * inv).exp()
                })
            }
            Pattern::SinusoidalGrating => Frame::from_fn(self.width, self.height, |x, _| {
                let phase = 2.0 * PI * (x as f64 - cx) / scale;
                bg + (fg - bg) * (0.5 + 0.5 * phase.sin())
            }),
            Pattern::BouncingDisc => Frame::from_fn(self.width, self.height, |x, y| {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let d = (dx * dx + dy * dy).sqrt();
                let coverage = (scale + 0.5 - d).clamp(0.0, 1.0);
                // slight dome so the brightest pixel marks the centre
                let shade = 1.0 - 0.25 * (d / scale).min(1.0).powi(2);
                bg + (fg - bg) * coverage * shade
            }),
        }
    }
}

/// Renders `floor(duration * capture_fps)` frames at `t_k = k / capture_fps`.
///
/// The result has `meta_fps = phy_fps_label = capture_fps`.
pub fn render_scene(
    spec: &SceneSpec,
    duration: f64,
    capture_fps: f64,
) -> Result<FrameSequence, SceneError> {
    spec.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(SceneError::Duration(duration));
    }
    if !(capture_fps.is_finite() && capture_fps >= 2.0) {
        return Err(SceneError::CaptureFps(capture_fps));
    }
    let count = crate::resample::snap_floor(duration * capture_fps);
    if count < 2 {
        return Err(SceneError::TooFewFrames(count));
    }
    let frames = (0..count)
        .map(|k| spec.render_at(k as f64 / capture_fps))
        .collect();
    Ok(FrameSequence::new(
        frames,
        capture_fps,
        Some(capture_fps),
        format!("{:?}", spec.pattern).to_lowercase(),
    )?)
}
