//! The regressor: motion tokens, query-pooling head, training and inference.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::FrameSequence;

pub mod head;
pub mod tokens;
pub mod train;

pub use head::{
    attention_weights, forward, loss_and_grad, loss_log_mse, query_pool, BatchItem, RegressorParams,
};
pub use tokens::{extract_tokens, MotionToken, TOKEN_DIM};
pub use train::{prepare_samples, train, train_on_tokens, TokenSample, TrainConfig, TrainOutcome};

/// Minimum mean block displacement (px) for the time scale to be observable.
pub const MOTION_EPSILON: f64 = 1e-4;
pub const DEFAULT_WINDOW: usize = 32;
pub const DEFAULT_STRIDE: usize = 4;
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChronoError {
    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("empty token list")]
    EmptyTokens,
    #[error("insufficient motion: mean displacement {mean_displacement} px is below the gate")]
    InsufficientMotion { mean_displacement: f64 },
    #[error("length mismatch: {predictions} predictions vs {targets} targets")]
    LengthMismatch { predictions: usize, targets: usize },
    #[error("label {0} is below the 2 fps floor")]
    LabelBelowFloor(f64),
    #[error("sequence {0:?} has no phyfps label")]
    Unlabeled(String),
    #[error("training data covers {0} distinct rate(s), need at least 2")]
    InsufficientRates(usize),
    #[error("no usable training clips")]
    NoUsableClips,
    #[error("video has {len} frames, shorter than the {window}-frame window")]
    VideoTooShort { len: usize, window: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Rejects token lists whose mean block displacement is below [`MOTION_EPSILON`].
pub fn motion_gate(tokens: &[MotionToken]) -> Result<(), ChronoError> {
    if tokens.is_empty() {
        return Err(ChronoError::EmptyTokens);
    }
    let mean = tokens.iter().map(|t| t.mean_displacement()).sum::<f64>() / tokens.len() as f64;
    if mean < MOTION_EPSILON {
        return Err(ChronoError::InsufficientMotion {
            mean_displacement: mean,
        });
    }
    Ok(())
}

/// Predicted log PhyFPS from precomputed tokens, after the motion gate.
pub fn predict_from_tokens(tokens: &[MotionToken], params: &RegressorParams) -> Result<f64, ChronoError> {
    motion_gate(tokens)?;
    Ok(forward(tokens, params)?.output)
}

/// Predicted `ln(PhyFPS)` for a clip.
pub fn predict_log_phyfps(clip: &FrameSequence, params: &RegressorParams) -> Result<f64, ChronoError> {
    params.validate()?;
    let toks = extract_tokens(clip)?;
    predict_from_tokens(&toks, params)
}

/// One sliding-window prediction; `f_hat` is `None` when the clip was motion-gated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPrediction {
    pub clip_index: usize,
    pub start_frame: usize,
    pub f_hat: Option<f64>,
}

/// Number of `window`-frame clips at `stride` in a video of `len` frames.
pub fn window_count(len: usize, window: usize, stride: usize) -> usize {
    if len < window || window == 0 || stride == 0 {
        0
    } else {
        (len - window) / stride + 1
    }
}

/// Predicts PhyFPS on clips `[c * stride, c * stride + window)`.
pub fn sliding_window_predict(
    video: &FrameSequence,
    params: &RegressorParams,
    window: usize,
    stride: usize,
) -> Result<Vec<WindowPrediction>, ChronoError> {
    if window < 2 || stride == 0 {
        return Err(ChronoError::InvalidConfig(format!(
            "window {window} must be >= 2 and stride {stride} >= 1"
        )));
    }
    if video.len() < window {
        return Err(ChronoError::VideoTooShort {
            len: video.len(),
            window,
        });
    }
    params.validate()?;
    // token t depends only on frames t and t + 1, so windows share one extraction
    let toks = extract_tokens(video)?;
    let count = window_count(video.len(), window, stride);
    (0..count)
        .map(|c| {
            let start = c * stride;
            let clip = &toks[start..start + window - 1];
            let f_hat = match predict_from_tokens(clip, params) {
                Ok(s) => Some(s.exp()),
                Err(ChronoError::InsufficientMotion { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(WindowPrediction {
                clip_index: c,
                start_frame: start,
                f_hat,
            })
        })
        .collect()
}

/// Serialized parameters plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub query: Vec<f64>,
    pub key_proj: Vec<Vec<f64>>,
    pub value_proj: Vec<Vec<f64>>,
    pub mlp_w1: Vec<Vec<f64>>,
    pub mlp_b1: Vec<f64>,
    pub mlp_w2: Vec<f64>,
    pub mlp_b2: f64,
    pub train_config: Option<TrainConfig>,
    pub final_loss: Option<f64>,
}

impl Checkpoint {
    pub fn new(params: &RegressorParams, config: Option<&TrainConfig>, final_loss: Option<f64>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            d: TOKEN_DIM,
            h: params.hidden_dim(),
            query: params.query.clone(),
            key_proj: params.key_proj.clone(),
            value_proj: params.value_proj.clone(),
            mlp_w1: params.mlp_w1.clone(),
            mlp_b1: params.mlp_b1.clone(),
            mlp_w2: params.mlp_w2.clone(),
            mlp_b2: params.mlp_b2,
            train_config: config.cloned(),
            final_loss,
        }
    }

    pub fn params(&self) -> Result<RegressorParams, ChronoError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(ChronoError::Checkpoint(format!("unsupported version {}", self.version)));
        }
        if self.d != TOKEN_DIM || self.h != self.query.len() {
            return Err(ChronoError::Checkpoint(format!(
                "declared D={} H={} do not match stored shapes",
                self.d, self.h
            )));
        }
        let p = RegressorParams {
            query: self.query.clone(),
            key_proj: self.key_proj.clone(),
            value_proj: self.value_proj.clone(),
            mlp_w1: self.mlp_w1.clone(),
            mlp_b1: self.mlp_b1.clone(),
            mlp_w2: self.mlp_w2.clone(),
            mlp_b2: self.mlp_b2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ChronoError> {
        serde_json::from_str(s).map_err(|e| ChronoError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ChronoError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| ChronoError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&raw)
    }
}

/// Loss trace as `iteration,loss` CSV (1-based iterations).
pub fn loss_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,loss\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, l));
    }
    out
}
