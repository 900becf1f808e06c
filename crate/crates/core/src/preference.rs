//! Bradley–Terry strengths from pairwise preferences, fitted by
//! minorization–maximization, with percentile bootstrap intervals.

use std::collections::BTreeMap;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_PSEUDO_COUNT: f64 = 0.5;
pub const DEFAULT_N_BOOT: usize = 2000;
pub const DEFAULT_LEVEL: f64 = 0.90;
const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreferenceError {
    #[error("no comparisons")]
    Empty,
    #[error("comparison {0} pits a variant against itself")]
    SelfComparison(usize),
    #[error("comparison graph is not strongly connected; the maximum likelihood estimate diverges")]
    Disconnected,
    #[error("variant {0:?} never appears in the comparisons")]
    UnknownVariant(String),
    #[error("level {0} must lie in (0, 1)")]
    Level(f64),
    #[error("every bootstrap replicate was degenerate")]
    BootstrapDegenerate,
    #[error("log-likelihood decreased from {before} to {after} at iteration {iteration}")]
    LikelihoodDecrease {
        iteration: usize,
        before: f64,
        after: f64,
    },
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub variant_a: String,
    pub variant_b: String,
    pub winner: Winner,
}

impl PairwiseComparison {
    pub fn new(a: &str, b: &str, winner: Winner) -> Self {
        PairwiseComparison {
            variant_a: a.to_string(),
            variant_b: b.to_string(),
            winner,
        }
    }

    fn winner_loser(&self) -> (&str, &str) {
        match self.winner {
            Winner::A => (&self.variant_a, &self.variant_b),
            Winner::B => (&self.variant_b, &self.variant_a),
        }
    }
}

/// Reads `variant_a,variant_b,winner` CSV; `winner` is `a`, `b`, or a variant id.
pub fn read_comparisons<R: Read>(r: R) -> Result<Vec<PairwiseComparison>, PreferenceError> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader
        .headers()
        .map_err(|e| PreferenceError::Csv(e.to_string()))?
        .clone();
    let expect = ["variant_a", "variant_b", "winner"];
    if headers.iter().map(str::trim).collect::<Vec<_>>() != expect {
        return Err(PreferenceError::Csv(format!(
            "expected header variant_a,variant_b,winner, got {:?}",
            headers
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| PreferenceError::Csv(e.to_string()))?;
        let a = rec.get(0).unwrap_or("").trim();
        let b = rec.get(1).unwrap_or("").trim();
        let w = rec.get(2).unwrap_or("").trim();
        let winner = match w {
            "a" | "A" => Winner::A,
            "b" | "B" => Winner::B,
            _ if w == a => Winner::A,
            _ if w == b => Winner::B,
            _ => {
                return Err(PreferenceError::Csv(format!(
                    "row {}: winner {w:?} is neither a, b, {a:?} nor {b:?}",
                    i + 2
                )))
            }
        };
        out.push(PairwiseComparison::new(a, b, winner));
    }
    Ok(out)
}

/// Win counts among a fixed, sorted variant set.
#[derive(Debug, Clone)]
struct WinMatrix {
    ids: Vec<String>,
    wins: Vec<Vec<f64>>,
}

impl WinMatrix {
    fn new(ids: Vec<String>) -> Self {
        let n = ids.len();
        WinMatrix {
            ids,
            wins: vec![vec![0.0; n]; n],
        }
    }

    fn index(&self) -> BTreeMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
    }

    fn add<'a>(&mut self, comps: impl IntoIterator<Item = &'a PairwiseComparison>) {
        let idx: BTreeMap<String, usize> = self
            .index()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        for c in comps {
            let (w, l) = c.winner_loser();
            self.wins[idx[w]][idx[l]] += 1.0;
        }
    }

    fn with_pseudo(mut self, pseudo: f64) -> Self {
        let n = self.ids.len();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    self.wins[i][j] += pseudo;
                }
            }
        }
        self
    }

    /// Every variant reachable from every other along "beat" edges.
    fn strongly_connected(&self) -> bool {
        let n = self.ids.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let w = if forward { self.wins[i][j] } else { self.wins[j][i] };
                    if w > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        n <= 1 || (reach(true) && reach(false))
    }
}

fn log_likelihood(wins: &[Vec<f64>], pi: &[f64]) -> f64 {
    let mut ll = 0.0;
    for (i, row) in wins.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if w > 0.0 {
                ll += w * (pi[i].ln() - (pi[i] + pi[j]).ln());
            }
        }
    }
    ll
}

/// Point estimates of one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct BtFit {
    pub ids: Vec<String>,
    /// Sums to 1.
    pub strengths: Vec<f64>,
    pub iterations: usize,
    /// Log-likelihood before the first update and after each iteration.
    pub log_likelihood: Vec<f64>,
}

impl BtFit {
    pub fn strength_of(&self, id: &str) -> Option<f64> {
        self.ids.iter().position(|x| x == id).map(|i| self.strengths[i])
    }
}

fn variant_ids(comps: &[PairwiseComparison]) -> Result<Vec<String>, PreferenceError> {
    if comps.is_empty() {
        return Err(PreferenceError::Empty);
    }
    let mut ids: Vec<String> = Vec::new();
    for (i, c) in comps.iter().enumerate() {
        if c.variant_a == c.variant_b {
            return Err(PreferenceError::SelfComparison(i));
        }
        ids.push(c.variant_a.clone());
        ids.push(c.variant_b.clone());
    }
    ids.sort();
    ids.dedup();
    Ok(ids)
}

/// Maximum-likelihood Bradley–Terry strengths.
///
/// `pseudo_count` is added to every ordered pair of variants before fitting
/// (0 disables it). Iterates `pi_i <- W_i / sum_j n_ij / (pi_i + pi_j)` until
/// the largest relative change is at most 1e-10, or 10,000 iterations.
pub fn fit_bt(comps: &[PairwiseComparison], pseudo_count: f64) -> Result<BtFit, PreferenceError> {
    let ids = variant_ids(comps)?;
    fit_with_ids(ids, comps, pseudo_count)
}

fn fit_with_ids(
    ids: Vec<String>,
    comps: &[PairwiseComparison],
    pseudo_count: f64,
) -> Result<BtFit, PreferenceError> {
    let mut m = WinMatrix::new(ids);
    m.add(comps);
    let m = m.with_pseudo(pseudo_count);
    if !m.strongly_connected() {
        return Err(PreferenceError::Disconnected);
    }
    let n = m.ids.len();
    let total_wins: Vec<f64> = m.wins.iter().map(|r| r.iter().sum()).collect();
    let mut pi = vec![1.0 / n as f64; n];
    let mut trace = vec![log_likelihood(&m.wins, &pi)];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next: Vec<f64> = (0..n)
            .map(|i| {
                let denom: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (m.wins[i][j] + m.wins[j][i]) / (pi[i] + pi[j]))
                    .sum();
                total_wins[i] / denom
            })
            .collect();
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|p| *p /= z);
        let change = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        let ll = log_likelihood(&m.wins, &next);
        let before = *trace.last().unwrap();
        if ll < before {
            if ll < before - 1e-9 * before.abs().max(1.0) {
                return Err(PreferenceError::LikelihoodDecrease {
                    iteration: iterations,
                    before,
                    after: ll,
                });
            }
            // roundoff at the fixed point: converged in floating point
            iterations -= 1;
            break;
        }
        pi = next;
        trace.push(ll);
        if change <= TOLERANCE {
            break;
        }
    }
    Ok(BtFit {
        ids: m.ids,
        strengths: pi,
        iterations,
        log_likelihood: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantStrength {
    pub id: String,
    pub strength_pct: f64,
    pub ci_low_pct: f64,
    pub ci_high_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BtResult {
    pub variants: Vec<VariantStrength>,
    pub n_comparisons: usize,
    pub n_boot: usize,
    pub level: f64,
    pub seed: u64,
}

impl BtResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn get(&self, id: &str) -> Option<&VariantStrength> {
        self.variants.iter().find(|v| v.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub level: f64,
    pub seed: u64,
    pub pseudo_count: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_boot: DEFAULT_N_BOOT,
            level: DEFAULT_LEVEL,
            seed: 0,
            pseudo_count: DEFAULT_PSEUDO_COUNT,
        }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Point fit plus percentile bootstrap intervals.
///
/// Replicate `r` draws from a ChaCha8 stream keyed by `(seed, r)`, so the
/// result does not depend on thread scheduling. Degenerate replicates
/// (possible only without pseudo-counts) are skipped.
pub fn bootstrap_ci(comps: &[PairwiseComparison], cfg: &BootstrapConfig) -> Result<BtResult, PreferenceError> {
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(PreferenceError::Level(cfg.level));
    }
    let ids = variant_ids(comps)?;
    let point = fit_with_ids(ids.clone(), comps, cfg.pseudo_count)?;
    let n = comps.len();
    let replicates: Vec<Option<Vec<f64>>> = (0..cfg.n_boot)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let sample: Vec<PairwiseComparison> =
                (0..n).map(|_| comps[rng.gen_range(0..n)].clone()).collect();
            fit_with_ids(ids.clone(), &sample, cfg.pseudo_count)
                .ok()
                .map(|f| f.strengths)
        })
        .collect();
    let ok: Vec<Vec<f64>> = replicates.into_iter().flatten().collect();
    if cfg.n_boot > 0 && ok.is_empty() {
        return Err(PreferenceError::BootstrapDegenerate);
    }
    let lo_q = (1.0 - cfg.level) / 2.0;
    let hi_q = 1.0 - lo_q;
    let variants = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let s = point.strengths[i];
            let (lo, hi) = if ok.is_empty() {
                (s, s)
            } else {
                let mut col: Vec<f64> = ok.iter().map(|r| r[i]).collect();
                col.sort_by(f64::total_cmp);
                (quantile(&col, lo_q), quantile(&col, hi_q))
            };
            VariantStrength {
                id: id.clone(),
                strength_pct: 100.0 * s,
                ci_low_pct: 100.0 * lo,
                ci_high_pct: 100.0 * hi,
            }
        })
        .collect();
    Ok(BtResult {
        variants,
        n_comparisons: n,
        n_boot: cfg.n_boot,
        level: cfg.level,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn games(a: &str, b: &str, a_wins: usize, b_wins: usize) -> Vec<PairwiseComparison> {
        let mut v = vec![PairwiseComparison::new(a, b, Winner::A); a_wins];
        v.extend(vec![PairwiseComparison::new(a, b, Winner::B); b_wins]);
        v
    }

    #[test]
    fn symmetric_split() {
        let f = fit_bt(&games("A", "B", 5, 5), DEFAULT_PSEUDO_COUNT).unwrap();
        assert!((f.strengths[0] - 0.5).abs() < 1e-9);
        assert!((f.strengths[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn two_player_closed_form() {
        let f = fit_bt(&games("A", "B", 3, 1), 0.0).unwrap();
        assert!((f.strength_of("A").unwrap() - 0.75).abs() < 1e-9);
        assert!((f.strength_of("B").unwrap() - 0.25).abs() < 1e-9);
    }

    #[test]
    fn undefeated_without_pseudo_is_disconnected() {
        assert_eq!(fit_bt(&games("A", "B", 3, 0), 0.0), Err(PreferenceError::Disconnected));
        assert!(fit_bt(&games("A", "B", 3, 0), 0.5).is_ok());
    }

    #[test]
    fn self_comparison_rejected() {
        let c = vec![PairwiseComparison::new("A", "A", Winner::A)];
        assert_eq!(fit_bt(&c, 0.5), Err(PreferenceError::SelfComparison(0)));
        assert_eq!(fit_bt(&[], 0.5), Err(PreferenceError::Empty));
    }

    #[test]
    fn csv_parsing() {
        let data = "variant_a,variant_b,winner\norig,pred,b\npred,dyn,pred\n";
        let c = read_comparisons(data.as_bytes()).unwrap();
        assert_eq!(c[0].winner, Winner::B);
        assert_eq!(c[1].winner, Winner::A);
        let bad = "variant_a,variant_b,winner\norig,pred,x\n";
        assert!(read_comparisons(bad.as_bytes()).is_err());
        let bad_header = "a,b,c\n";
        assert!(read_comparisons(bad_header.as_bytes()).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[0.0, 1.0, 2.0, 3.0], 0.5), 1.5);
        assert_eq!(quantile(&[4.0], 0.05), 4.0);
    }
}
