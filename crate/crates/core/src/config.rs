//! Pipeline configuration: one JSON document keyed by subcommand.
//!
//! Each section mirrors the flags of its subcommand; any flag given on the
//! command line overrides the file. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

/// Copies every `None` field of `$flags` from `$file`.
macro_rules! overlay {
    ($flags:expr, $file:expr, [$($field:ident),* $(,)?]) => {{
        let file = $file;
        $( if $flags.$field.is_none() { $flags.$field = file.$field; } )*
    }};
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PipelineConfig {
    pub synth: Option<SynthArgs>,
    pub upsample: Option<UpsampleArgs>,
    pub augment: Option<AugmentArgs>,
    pub build_dataset: Option<BuildDatasetArgs>,
    pub train: Option<TrainArgs>,
    pub predict: Option<PredictArgs>,
    pub audit: Option<AuditArgs>,
    pub retime: Option<RetimeArgs>,
    pub bt: Option<BtArgs>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthArgs {
    /// blob | grating | disc
    #[arg(long)]
    pub pattern: Option<String>,
    /// Horizontal speed in px/s (sign gives direction)
    #[arg(long, allow_hyphen_values = true)]
    pub velocity: Option<f64>,
    /// Blob sigma, grating wavelength or disc radius in px
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub background: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    /// Capture rate; also the ground-truth PhyFPS
    #[arg(long)]
    pub fps: Option<f64>,
    /// Draw a random scene from this seed instead of the explicit parameters
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub speed_min: Option<f64>,
    #[arg(long)]
    pub speed_max: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SynthArgs {
    pub fn overlay(&mut self, file: Self) {
        overlay!(self, file, [pattern, velocity, scale, width, height, background, duration, fps, seed, speed_min, speed_max, out]);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpsampleArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Target rate (default 240)
    #[arg(long)]
    pub fps: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl UpsampleArgs {
    pub fn overlay(&mut self, file: Self) {
        overlay!(self, file, [input, fps, out]);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// sharp | blur | rolling_shutter
    #[arg(long)]
    pub strategy: Option<String>,
    /// Source rate (defaults to the input's meta fps)
    #[arg(long)]
    pub f_high: Option<f64>,
    #[arg(long)]
    pub f_low: Option<f64>,
    /// Window divisor: 1, 2 or 4
    #[arg(long)]
    pub divisor: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl AugmentArgs {
    pub fn overlay(&mut self, file: Self) {
        overlay!(self, file, [input, strategy, f_high, f_low, divisor, out]);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildDatasetArgs {
    /// High-rate source sequences
    #[arg(long, num_args = 1..)]
    pub inputs: Option<Vec<PathBuf>>,
    /// common | wide
    #[arg(long)]
    pub grid: Option<String>,
    /// Explicit rate list, overrides --grid
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub divisors: Option<Vec<u32>>,
    #[arg(long)]
    pub clip_len: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub retain_sources: Option<bool>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl BuildDatasetArgs {
    pub fn overlay(&mut self, file: Self) {
        overlay!(self, file, [inputs, grid, rates, strategies, divisors, clip_len, retain_sources, out_dir]);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainArgs {
    /// Labeled training sequences
    #[arg(long, num_args = 1..)]
    pub inputs: Option<Vec<PathBuf>>,
    /// Dataset manifest written by build-dataset
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub train_clip_len: Option<usize>,
    /// Checkpoint JSON path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loss trace CSV path (default: next to the checkpoint)
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

impl TrainArgs {
    pub fn overlay(&mut self, file: Self) {
        overlay!(self, file, [inputs, manifest, learning_rate, iterations, batch_size, seed, hidden_dim, train_clip_len, out, loss_csv]);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub inputs: Option<Vec<PathBuf>>,
    /// Clip length T
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// CSV output (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl PredictArgs {
    pub fn overlay(&mut self, file: Self) {
        overlay!(self, file, [checkpoint, inputs, window, stride, out]);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditArgs {
    /// Prediction CSV (video_id,clip_index,f_hat)
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Meta fps applied to every video
    #[arg(long)]
    pub meta_fps: Option<f64>,
    /// CSV video_id,meta_fps; overrides --meta-fps per video
    #[arg(long)]
    pub meta_table: Option<PathBuf>,
    #[arg(long)]
    pub model_id: Option<String>,
    /// Report JSON (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table-style CSV view
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

impl AuditArgs {
    pub fn overlay(&mut self, file: Self) {
        overlay!(self, file, [predictions, meta_fps, meta_table, model_id, out, csv]);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetimeArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// global | dynamic
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub output_fps: Option<f64>,
    /// Prediction CSV; rows for this video are selected by id
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Predict on the fly with this checkpoint instead of reading a CSV
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Only rewrite the container rate (global mode)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub relabel_only: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plan JSON path (default: next to the output)
    #[arg(long)]
    pub plan: Option<PathBuf>,
}

impl RetimeArgs {
    pub fn overlay(&mut self, file: Self) {
        overlay!(self, file, [input, mode, output_fps, predictions, checkpoint, window, stride, relabel_only, out, plan]);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BtArgs {
    /// Comparison CSV (variant_a,variant_b,winner)
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub n_boot: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per ordered pair; 0 disables
    #[arg(long)]
    pub pseudo_count: Option<f64>,
    /// Result JSON (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl BtArgs {
    pub fn overlay(&mut self, file: Self) {
        overlay!(self, file, [input, n_boot, level, seed, pseudo_count, out]);
    }
}
