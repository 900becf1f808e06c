//! Handcrafted motion tokens, one per adjacent frame pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frame::{Frame, FrameSequence};

use super::ChronoError;

pub const TOKEN_DIM: usize = 6;
pub const BLOCK_SIZE: usize = 8;
pub const SEARCH_RADIUS: i64 = 4;
/// Floor for the log-difference entry.
pub const LOG_DIFF_FLOOR: f64 = -12.0;

/// Blocks whose zero-displacement SAD is at or below this carry no motion.
const STATIC_BLOCK_SAD: f64 = 1e-9;
const ENERGY_EPS: f64 = 1e-12;

/// Motion features of the frame pair `(t, t + 1)`.
///
/// Entries, in order: mean |diff|, std of diff, mean block displacement (px),
/// max block displacement (px), Laplacian energy ratio `E(t+1) / E(t)`,
/// `ln(mean |diff|)` clamped below at -12.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionToken(pub [f64; TOKEN_DIM]);

impl MotionToken {
    pub fn mean_abs_diff(&self) -> f64 {
        self.0[0]
    }
    pub fn std_diff(&self) -> f64 {
        self.0[1]
    }
    pub fn mean_displacement(&self) -> f64 {
        self.0[2]
    }
    pub fn max_displacement(&self) -> f64 {
        self.0[3]
    }
    pub fn energy_ratio(&self) -> f64 {
        self.0[4]
    }
    pub fn log_mean_abs_diff(&self) -> f64 {
        self.0[5]
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `T - 1` tokens for a `T`-frame clip.
pub fn extract_tokens(clip: &FrameSequence) -> Result<Vec<MotionToken>, ChronoError> {
    extract_from_frames(clip.frames())
}

pub(crate) fn extract_from_frames(frames: &[Frame]) -> Result<Vec<MotionToken>, ChronoError> {
    if frames.len() < 2 {
        return Err(ChronoError::TooFewFrames {
            needed: 2,
            got: frames.len(),
        });
    }
    let energies: Vec<f64> = frames.par_iter().map(laplacian_energy).collect();
    Ok((0..frames.len() - 1)
        .into_par_iter()
        .map(|t| pair_token(&frames[t], &frames[t + 1], energies[t], energies[t + 1]))
        .collect())
}

/// Token for a single frame pair.
pub fn token_for_pair(a: &Frame, b: &Frame) -> MotionToken {
    pair_token(a, b, laplacian_energy(a), laplacian_energy(b))
}

fn pair_token(a: &Frame, b: &Frame, ea: f64, eb: f64) -> MotionToken {
    let n = a.samples().len() as f64;
    let mut abs_sum = 0.0;
    let mut sum = 0.0;
    let mut sq_sum = 0.0;
    for (&p, &q) in a.samples().iter().zip(b.samples()) {
        let d = q - p;
        abs_sum += d.abs();
        sum += d;
        sq_sum += d * d;
    }
    let mad = abs_sum / n;
    let mean = sum / n;
    let std = (sq_sum / n - mean * mean).max(0.0).sqrt();
    let (mean_disp, max_disp) = block_motion(a, b);
    let ratio = (eb + ENERGY_EPS) / (ea + ENERGY_EPS);
    let log_mad = if mad > 0.0 {
        mad.ln().max(LOG_DIFF_FLOOR)
    } else {
        LOG_DIFF_FLOOR
    };
    MotionToken([mad, std, mean_disp, max_disp, ratio, log_mad])
}

/// Mean squared 4-neighbour Laplacian over interior pixels.
pub fn laplacian_energy(f: &Frame) -> f64 {
    let (w, h) = (f.width(), f.height());
    if w < 3 || h < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let l = 4.0 * f.at(x, y) - f.at(x - 1, y) - f.at(x + 1, y) - f.at(x, y - 1) - f.at(x, y + 1);
            acc += l * l;
        }
    }
    acc / ((w - 2) * (h - 2)) as f64
}

/// Displacement of one block from frame `a` into frame `b`, with sub-pixel refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMatch {
    pub dx: f64,
    pub dy: f64,
    pub sad: f64,
}

/// Exhaustive SAD search of the `BLOCK_SIZE` block at `(bx, by)` within
/// `±SEARCH_RADIUS`; ties go to the smaller displacement, then raster order.
/// Returns `None` for a block with no change at zero displacement.
pub fn match_block(a: &Frame, b: &Frame, bx: usize, by: usize) -> Option<BlockMatch> {
    let (w, h) = (a.width() as i64, a.height() as i64);
    let r = SEARCH_RADIUS;
    let side = (2 * r + 1) as usize;
    let mut table = vec![f64::INFINITY; side * side];
    let (x0, y0) = (bx as i64, by as i64);
    let bs = BLOCK_SIZE as i64;
    let sad_at = |dx: i64, dy: i64| -> f64 {
        let mut s = 0.0;
        for y in 0..bs {
            let ra = ((y0 + y) * w + x0) as usize;
            let rb = ((y0 + y + dy) * w + x0 + dx) as usize;
            let pa = &a.samples()[ra..ra + BLOCK_SIZE];
            let pb = &b.samples()[rb..rb + BLOCK_SIZE];
            for (p, q) in pa.iter().zip(pb) {
                s += (p - q).abs();
            }
        }
        s
    };
    let mut best: Option<(f64, i64, i64, i64)> = None;
    for dy in -r..=r {
        if y0 + dy < 0 || y0 + dy + bs > h {
            continue;
        }
        for dx in -r..=r {
            if x0 + dx < 0 || x0 + dx + bs > w {
                continue;
            }
            let s = sad_at(dx, dy);
            table[((dy + r) as usize) * side + (dx + r) as usize] = s;
            let mag = dx * dx + dy * dy;
            let better = match best {
                None => true,
                Some((bs_, bm, _, _)) => s < bs_ || (s == bs_ && mag < bm),
            };
            if better {
                best = Some((s, mag, dx, dy));
            }
        }
    }
    let zero = table[(r as usize) * side + r as usize];
    if zero <= STATIC_BLOCK_SAD {
        return None;
    }
    let (sad, _, dx, dy) = best?;
    if sad <= STATIC_BLOCK_SAD {
        return Some(BlockMatch {
            dx: dx as f64,
            dy: dy as f64,
            sad,
        });
    }
    let at = |dx: i64, dy: i64| -> Option<f64> {
        if dx.abs() > r || dy.abs() > r {
            return None;
        }
        let v = table[((dy + r) as usize) * side + (dx + r) as usize];
        v.is_finite().then_some(v)
    };
    let ox = equiangular_offset(at(dx - 1, dy), sad, at(dx + 1, dy));
    let oy = equiangular_offset(at(dx, dy - 1), sad, at(dx, dy + 1));
    Some(BlockMatch {
        dx: dx as f64 + ox,
        dy: dy as f64 + oy,
        sad,
    })
}

/// Sub-pixel vertex of a V-shaped cost sampled at -1, 0, +1 around the minimum.
fn equiangular_offset(left: Option<f64>, centre: f64, right: Option<f64>) -> f64 {
    let (Some(l), Some(r)) = (left, right) else {
        return 0.0;
    };
    let off = if l > r {
        (l - r) / (2.0 * (l - centre))
    } else if r > l {
        (l - r) / (2.0 * (r - centre))
    } else {
        0.0
    };
    if off.is_finite() {
        off.clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Top-left corners of the blocks whose whole search window fits in a
/// `len`-pixel axis: `r, r + B, r + 2B, ...` while `x + B + r <= len`.
fn block_origins(len: usize) -> impl Iterator<Item = usize> {
    let r = SEARCH_RADIUS as usize;
    (r..)
        .step_by(BLOCK_SIZE)
        .take_while(move |&x| x + BLOCK_SIZE + r <= len)
}

/// Mean and max displacement magnitude over the blocks that changed.
pub fn block_motion(a: &Frame, b: &Frame) -> (f64, f64) {
    let (w, h) = (a.width(), a.height());
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut count = 0usize;
    for by in block_origins(h) {
        for bx in block_origins(w) {
            if let Some(m) = match_block(a, b, bx, by) {
                let d = m.dx.hypot(m.dy);
                sum += d;
                max = max.max(d);
                count += 1;
            }
        }
    }
    if count == 0 {
        (0.0, 0.0)
    } else {
        (sum / count as f64, max)
    }
}
