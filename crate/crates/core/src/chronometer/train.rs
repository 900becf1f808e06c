//! Seeded minibatch Adam on the log-space MSE.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::head::{forward, loss_and_grad, BatchItem, RegressorParams};
use super::tokens::{extract_tokens, MotionToken};
use super::{motion_gate, ChronoError};
use crate::frame::FrameSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_dim: usize,
    pub train_clip_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            iterations: 4000,
            batch_size: 32,
            seed: 0,
            hidden_dim: 16,
            train_clip_len: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ChronoError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ChronoError::InvalidConfig(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.iterations == 0 || self.batch_size == 0 || self.hidden_dim == 0 {
            return Err(ChronoError::InvalidConfig(
                "iterations, batch_size and hidden_dim must be positive".into(),
            ));
        }
        if self.train_clip_len < 2 {
            return Err(ChronoError::InvalidConfig(
                "train_clip_len must be at least 2 frames".into(),
            ));
        }
        Ok(())
    }
}

/// Precomputed tokens of one labeled sequence.
#[derive(Debug, Clone)]
pub struct TokenSample {
    pub tokens: Vec<MotionToken>,
    pub label: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: RegressorParams,
    pub loss_trace: Vec<f64>,
    pub final_loss: f64,
    /// Sequences dropped by the motion gate.
    pub skipped: usize,
}

/// Tokenizes labeled sequences, dropping motion-gated ones.
///
/// Returns the usable samples and the number skipped.
pub fn prepare_samples(dataset: &[FrameSequence]) -> Result<(Vec<TokenSample>, usize), ChronoError> {
    for seq in dataset {
        if seq.phy_fps_label().is_none() {
            return Err(ChronoError::Unlabeled(seq.source_id().to_string()));
        }
    }
    let tokenized: Vec<Result<Vec<MotionToken>, ChronoError>> =
        dataset.par_iter().map(extract_tokens).collect();
    let mut samples = Vec::with_capacity(dataset.len());
    let mut skipped = 0;
    for (seq, toks) in dataset.iter().zip(tokenized) {
        let tokens = toks?;
        if motion_gate(&tokens).is_err() {
            skipped += 1;
            continue;
        }
        samples.push(TokenSample {
            tokens,
            label: seq.phy_fps_label().unwrap(),
        });
    }
    Ok((samples, skipped))
}

/// Trains the head on labeled sequences covering at least two distinct rates.
pub fn train(dataset: &[FrameSequence], config: &TrainConfig) -> Result<TrainOutcome, ChronoError> {
    config.validate()?;
    let (samples, skipped) = prepare_samples(dataset)?;
    if skipped > 0 {
        log::warn!("{skipped} of {} sequences skipped by the motion gate", dataset.len());
    }
    let mut rates: Vec<f64> = samples.iter().map(|s| s.label).collect();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    if rates.len() < 2 {
        return Err(ChronoError::InsufficientRates(rates.len()));
    }
    let mut outcome = train_on_tokens(&samples, config)?;
    outcome.skipped = skipped;
    Ok(outcome)
}

/// Trains directly on precomputed token samples.
pub fn train_on_tokens(samples: &[TokenSample], config: &TrainConfig) -> Result<TrainOutcome, ChronoError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(ChronoError::NoUsableClips);
    }
    let window = config.train_clip_len - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mean_log = samples.iter().map(|s| s.label.ln()).sum::<f64>() / samples.len() as f64;
    let mut params = RegressorParams::init(&mut rng, config.hidden_dim, mean_log);
    let mut flat = params.flatten();
    let mut m = vec![0.0; flat.len()];
    let mut v = vec![0.0; flat.len()];
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut trace = Vec::with_capacity(config.iterations);

    for it in 1..=config.iterations {
        let batch: Vec<BatchItem> = (0..config.batch_size)
            .map(|_| {
                let s = &samples[rng.gen_range(0..samples.len())];
                let len = s.tokens.len();
                let tokens = if len <= window {
                    &s.tokens[..]
                } else {
                    let start = rng.gen_range(0..=len - window);
                    &s.tokens[start..start + window]
                };
                BatchItem {
                    tokens,
                    label: s.label,
                }
            })
            .collect();
        let (loss, grad) = loss_and_grad(&params, &batch)?;
        trace.push(loss);
        let g = grad.flatten();
        let bc1 = 1.0 - beta1.powi(it as i32);
        let bc2 = 1.0 - beta2.powi(it as i32);
        for i in 0..flat.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            flat[i] -= config.learning_rate * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
        }
        params.assign_flat(&flat);
    }

    let final_loss = dataset_loss(&params, samples, window)?;
    Ok(TrainOutcome {
        params,
        loss_trace: trace,
        final_loss,
        skipped: 0,
    })
}

/// Log-MSE over every sample's leading `window` tokens.
pub fn dataset_loss(params: &RegressorParams, samples: &[TokenSample], window: usize) -> Result<f64, ChronoError> {
    let mut preds = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        let n = s.tokens.len().min(window.max(1));
        preds.push(forward(&s.tokens[..n], params)?.output);
        labels.push(s.label);
    }
    super::head::loss_log_mse(&preds, &labels)
}
