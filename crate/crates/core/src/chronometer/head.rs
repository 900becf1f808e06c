//! Query-pooling attention head and MLP that map motion tokens to a log frame rate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tokens::{MotionToken, TOKEN_DIM};
use super::ChronoError;
use crate::frame::MIN_LABEL_FPS;

/// Learnable surface of the regressor.
///
/// `key_proj` and `value_proj` are `D x H` (row per token feature);
/// `mlp_w1` is `H x H` (row per hidden unit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorParams {
    pub query: Vec<f64>,
    pub key_proj: Vec<Vec<f64>>,
    pub value_proj: Vec<Vec<f64>>,
    pub mlp_w1: Vec<Vec<f64>>,
    pub mlp_b1: Vec<f64>,
    pub mlp_w2: Vec<f64>,
    pub mlp_b2: f64,
}

fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Vec<Vec<f64>> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-a..a)).collect())
        .collect()
}

impl RegressorParams {
    /// Glorot-uniform weights, zero hidden bias, output bias `bias`.
    pub fn init<R: Rng>(rng: &mut R, hidden: usize, bias: f64) -> Self {
        let d = TOKEN_DIM;
        let query = glorot(rng, 1, hidden, hidden, 1).remove(0);
        let key_proj = glorot(rng, d, hidden, d, hidden);
        let value_proj = glorot(rng, d, hidden, d, hidden);
        let mlp_w1 = glorot(rng, hidden, hidden, hidden, hidden);
        let mlp_w2 = glorot(rng, 1, hidden, hidden, 1).remove(0);
        RegressorParams {
            query,
            key_proj,
            value_proj,
            mlp_w1,
            mlp_b1: vec![0.0; hidden],
            mlp_w2,
            mlp_b2: bias,
        }
    }

    pub fn zeros(hidden: usize) -> Self {
        RegressorParams {
            query: vec![0.0; hidden],
            key_proj: vec![vec![0.0; hidden]; TOKEN_DIM],
            value_proj: vec![vec![0.0; hidden]; TOKEN_DIM],
            mlp_w1: vec![vec![0.0; hidden]; hidden],
            mlp_b1: vec![0.0; hidden],
            mlp_w2: vec![0.0; hidden],
            mlp_b2: 0.0,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.query.len()
    }

    pub fn validate(&self) -> Result<(), ChronoError> {
        let h = self.hidden_dim();
        let bad = |what: &str| Err(ChronoError::InvalidParams(what.to_string()));
        if h == 0 {
            return bad("hidden dimension is zero");
        }
        let mat_ok = |m: &Vec<Vec<f64>>, rows: usize| m.len() == rows && m.iter().all(|r| r.len() == h);
        if !mat_ok(&self.key_proj, TOKEN_DIM) || !mat_ok(&self.value_proj, TOKEN_DIM) {
            return bad("projection matrices must be D x H");
        }
        if !mat_ok(&self.mlp_w1, h) || self.mlp_b1.len() != h || self.mlp_w2.len() != h {
            return bad("mlp shapes must be H x H, H, H");
        }
        if !self.flatten().iter().all(|v| v.is_finite()) {
            return bad("non-finite parameter");
        }
        Ok(())
    }

    /// All parameters in a fixed order: query, key, value, w1, b1, w2, b2.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.query);
        for m in [&self.key_proj, &self.value_proj, &self.mlp_w1] {
            for row in m {
                out.extend_from_slice(row);
            }
        }
        out.extend_from_slice(&self.mlp_b1);
        out.extend_from_slice(&self.mlp_w2);
        out.push(self.mlp_b2);
        out
    }

    /// Overwrites every parameter from `flat` (same order as [`flatten`](Self::flatten)).
    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len());
        let mut it = flat.iter().copied();
        for v in self.query.iter_mut() {
            *v = it.next().unwrap();
        }
        for m in [&mut self.key_proj, &mut self.value_proj, &mut self.mlp_w1] {
            for row in m.iter_mut() {
                for v in row.iter_mut() {
                    *v = it.next().unwrap();
                }
            }
        }
        for v in self.mlp_b1.iter_mut().chain(self.mlp_w2.iter_mut()) {
            *v = it.next().unwrap();
        }
        self.mlp_b2 = it.next().unwrap();
    }

    pub fn len(&self) -> usize {
        let h = self.hidden_dim();
        h + 2 * TOKEN_DIM * h + h * h + h + h + 1
    }

    pub fn is_empty(&self) -> bool {
        self.hidden_dim() == 0
    }
}

/// `x^T M` for a `D x H` matrix.
fn project(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let h = m[0].len();
    let mut out = vec![0.0; h];
    for (xi, row) in x.iter().zip(m) {
        for (o, w) in out.iter_mut().zip(row) {
            *o += xi * w;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Forward {
    pub keys: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub pooled: Vec<f64>,
    pub hidden: Vec<f64>,
    pub output: f64,
}

/// Softmax attention weights of the learnable query over the tokens.
pub fn attention_weights(tokens: &[MotionToken], params: &RegressorParams) -> Result<Vec<f64>, ChronoError> {
    if tokens.is_empty() {
        return Err(ChronoError::EmptyTokens);
    }
    let keys: Vec<Vec<f64>> = tokens.iter().map(|t| project(&params.key_proj, &t.0)).collect();
    Ok(softmax_scores(&keys, params))
}

fn softmax_scores(keys: &[Vec<f64>], params: &RegressorParams) -> Vec<f64> {
    let scale = (params.hidden_dim() as f64).sqrt();
    let scores: Vec<f64> = keys.iter().map(|k| dot(&params.query, k) / scale).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `sum_t softmax_t(<q, K x_t> / sqrt(H)) * V x_t`; accepts any nonzero token count.
pub fn query_pool(tokens: &[MotionToken], params: &RegressorParams) -> Result<Vec<f64>, ChronoError> {
    Ok(forward(tokens, params)?.pooled)
}

pub fn forward(tokens: &[MotionToken], params: &RegressorParams) -> Result<Forward, ChronoError> {
    if tokens.is_empty() {
        return Err(ChronoError::EmptyTokens);
    }
    let h = params.hidden_dim();
    let keys: Vec<Vec<f64>> = tokens.iter().map(|t| project(&params.key_proj, &t.0)).collect();
    let values: Vec<Vec<f64>> = tokens.iter().map(|t| project(&params.value_proj, &t.0)).collect();
    let weights = softmax_scores(&keys, params);
    let mut pooled = vec![0.0; h];
    for (w, v) in weights.iter().zip(&values) {
        for (p, x) in pooled.iter_mut().zip(v) {
            *p += w * x;
        }
    }
    let hidden: Vec<f64> = params
        .mlp_w1
        .iter()
        .zip(&params.mlp_b1)
        .map(|(row, b)| (dot(row, &pooled) + b).tanh())
        .collect();
    let output = dot(&params.mlp_w2, &hidden) + params.mlp_b2;
    Ok(Forward {
        keys,
        values,
        weights,
        pooled,
        hidden,
        output,
    })
}

/// Mean squared error between `ln y` and predicted log rates; no `+1` offset.
pub fn loss_log_mse(predictions: &[f64], targets: &[f64]) -> Result<f64, ChronoError> {
    if predictions.len() != targets.len() {
        return Err(ChronoError::LengthMismatch {
            predictions: predictions.len(),
            targets: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(ChronoError::LengthMismatch {
            predictions: 0,
            targets: 0,
        });
    }
    let mut acc = 0.0;
    for (&s, &y) in predictions.iter().zip(targets) {
        if !(y >= MIN_LABEL_FPS) {
            return Err(ChronoError::LabelBelowFloor(y));
        }
        let e = y.ln() - s;
        acc += e * e;
    }
    Ok(acc / predictions.len() as f64)
}

/// Accumulates `d loss / d params` for one sample into `grad`, given `dl_ds`.
fn backward(
    tokens: &[MotionToken],
    params: &RegressorParams,
    fwd: &Forward,
    dl_ds: f64,
    grad: &mut RegressorParams,
) {
    let h = params.hidden_dim();
    let scale = (h as f64).sqrt();
    grad.mlp_b2 += dl_ds;
    let mut dpooled = vec![0.0; h];
    for j in 0..h {
        grad.mlp_w2[j] += dl_ds * fwd.hidden[j];
        let dz = dl_ds * params.mlp_w2[j] * (1.0 - fwd.hidden[j] * fwd.hidden[j]);
        grad.mlp_b1[j] += dz;
        for (i, p) in fwd.pooled.iter().enumerate() {
            grad.mlp_w1[j][i] += dz * p;
            dpooled[i] += dz * params.mlp_w1[j][i];
        }
    }
    // d pooled / d weights, then through the softmax
    let dweights: Vec<f64> = fwd.values.iter().map(|v| dot(&dpooled, v)).collect();
    let mean_dw: f64 = fwd.weights.iter().zip(&dweights).map(|(w, d)| w * d).sum();
    for (t, tok) in tokens.iter().enumerate() {
        let w = fwd.weights[t];
        let dscore = w * (dweights[t] - mean_dw) / scale;
        for (d, x) in tok.0.iter().enumerate() {
            for j in 0..h {
                grad.value_proj[d][j] += w * dpooled[j] * x;
                grad.key_proj[d][j] += dscore * params.query[j] * x;
            }
        }
        for j in 0..h {
            grad.query[j] += dscore * fwd.keys[t][j];
        }
    }
}

/// One labeled training example: a token window and its PhyFPS.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub tokens: &'a [MotionToken],
    pub label: f64,
}

/// Minibatch log-MSE and its analytic gradient.
pub fn loss_and_grad(
    params: &RegressorParams,
    batch: &[BatchItem<'_>],
) -> Result<(f64, RegressorParams), ChronoError> {
    let mut grad = RegressorParams::zeros(params.hidden_dim());
    let mut preds = Vec::with_capacity(batch.len());
    let mut labels = Vec::with_capacity(batch.len());
    let n = batch.len() as f64;
    for item in batch {
        let fwd = forward(item.tokens, params)?;
        if !(item.label >= MIN_LABEL_FPS) {
            return Err(ChronoError::LabelBelowFloor(item.label));
        }
        let dl_ds = -2.0 * (item.label.ln() - fwd.output) / n;
        backward(item.tokens, params, &fwd, dl_ds, &mut grad);
        preds.push(fwd.output);
        labels.push(item.label);
    }
    Ok((loss_log_mse(&preds, &labels)?, grad))
}
