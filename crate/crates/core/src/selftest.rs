//! In-process oracle and invariant checks behind `phyfps selftest`.
//!
//! Everything is seeded and prints no timings, so the report is byte-stable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audit::{alignment_errors, consistency_cv, mae_mape, model_mean, ClipPrediction, VideoAudit};
use crate::chronometer::head::{loss_and_grad, loss_log_mse, BatchItem, RegressorParams};
use crate::chronometer::sliding_window_predict;
use crate::chronometer::tokens::MotionToken;
use crate::frame::{Frame, FrameSequence};
use crate::fseq::{decode_fseq, write_fseq};
use crate::preference::{bootstrap_ci, fit_bt, BootstrapConfig, PairwiseComparison, Winner};
use crate::resample::{motion_blur, rolling_shutter, sharp_capture, ResampleSpec, Strategy};
use crate::retime::{apply_retime, plan_global};
use crate::scene::{render_scene, Pattern, SceneSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name,
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

pub fn run_all() -> Vec<Check> {
    vec![
        resampler_oracle(),
        index_map(),
        loss_cases(),
        gradient_check(),
        metric_oracle(),
        sliding_window(),
        retime_identity_and_duration(),
        bradley_terry(),
        fseq_roundtrip(),
    ]
}

fn random_sequence(rng: &mut ChaCha8Rng, w: usize, h: usize, t: usize, fps: f64) -> FrameSequence {
    let frames = (0..t)
        .map(|_| Frame::from_fn(w, h, |_, _| rng.gen::<f64>()))
        .collect();
    FrameSequence::new(frames, fps, Some(fps), "rand").expect("valid sequence")
}

/// Output frames by direct per-pixel loops; rates are integers so `floor(k N)`
/// is exact integer division.
fn naive_resample(seq: &FrameSequence, strategy: Strategy, f_low: u64, m: usize) -> Vec<Vec<f64>> {
    let f_high = seq.meta_fps() as u64;
    let (w, h) = (seq.width(), seq.height());
    let mut out = Vec::new();
    for k in 0.. {
        let base = (k * f_high / f_low) as usize;
        let last = match strategy {
            Strategy::Sharp => base,
            Strategy::Blur => base + m - 1,
            Strategy::RollingShutter => base + m * (w - 1) / w,
        };
        if last >= seq.len() {
            break;
        }
        let mut px = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                px[y * w + x] = match strategy {
                    Strategy::Sharp => seq.frames()[base].at(x, y),
                    Strategy::Blur => {
                        (0..m).map(|i| seq.frames()[base + i].at(x, y)).sum::<f64>() / m as f64
                    }
                    Strategy::RollingShutter => seq.frames()[base + m * x / w].at(x, y),
                };
            }
        }
        out.push(px);
    }
    out
}

fn resampler_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..10 {
        let seq = random_sequence(&mut rng, 8, 8, 48, 240.0);
        let f_low = [12u64, 18, 24, 30, 40, 60][rng.gen_range(0..6)];
        let div = [1u32, 2, 4][rng.gen_range(0..3)];
        for strategy in Strategy::ALL {
            let d = if strategy == Strategy::Sharp { 1 } else { div };
            let spec = ResampleSpec::new(strategy, 240.0, f_low as f64, d).expect("spec");
            let got = match strategy {
                Strategy::Sharp => sharp_capture(&seq, &spec),
                Strategy::Blur => motion_blur(&seq, &spec),
                Strategy::RollingShutter => rolling_shutter(&seq, &spec),
            };
            let want = naive_resample(&seq, strategy, f_low, spec.window());
            match got {
                Ok(g) if g.len() == want.len() => {
                    for (f, px) in g.frames().iter().zip(&want) {
                        for (a, b) in f.samples().iter().zip(px) {
                            worst = worst.max((a - b).abs());
                        }
                    }
                }
                // too few source frames for even one output is fine if the oracle agrees
                Err(_) if want.is_empty() => {}
                _ => ok = false,
            }
        }
    }
    // M = 1 collapses every strategy onto sharp capture
    let seq = random_sequence(&mut rng, 8, 8, 48, 240.0);
    let sharp = sharp_capture(&seq, &ResampleSpec::new(Strategy::Sharp, 240.0, 120.0, 1).unwrap());
    let blur = motion_blur(&seq, &ResampleSpec::new(Strategy::Blur, 240.0, 120.0, 4).unwrap());
    let rs = rolling_shutter(&seq, &ResampleSpec::new(Strategy::RollingShutter, 240.0, 120.0, 4).unwrap());
    let chain = match (sharp, blur, rs) {
        (Ok(s), Ok(b), Ok(r)) => s.frames() == b.frames() && s.frames() == r.frames(),
        _ => false,
    };
    Check::new(
        "resampler_oracle",
        ok && chain && worst <= 1e-12,
        format!("max |diff| {worst:e}, degeneracy chain {}", if chain { "exact" } else { "broken" }),
    )
}

fn index_map() -> Check {
    let spec = ResampleSpec::new(Strategy::Sharp, 240.0, 18.0, 1).expect("spec");
    let bad = (0..1000usize).filter(|&k| spec.source_index(k) != k * 240 / 18).count();
    Check::new("index_map_240_18", bad == 0, format!("{bad} of 1000 indices differ from floor(k*240/18)"))
}

fn loss_cases() -> Check {
    let e = std::f64::consts::E;
    let cases = [
        (vec![30f64.ln(), 24f64.ln()], vec![30.0, 24.0], 0.0),
        (vec![0.0], vec![e * e], 4.0),
        (vec![0.0, 2.0], vec![e, e], 1.0),
    ];
    let mut worst = 0.0f64;
    let mut ok = true;
    for (s, y, want) in cases {
        match loss_log_mse(&s, &y) {
            Ok(l) => worst = worst.max((l - want).abs()),
            Err(_) => ok = false,
        }
    }
    Check::new("loss_log_mse_cases", ok && worst <= 1e-12, format!("max |diff| {worst:e}"))
}

fn random_tokens(rng: &mut ChaCha8Rng, n: usize) -> Vec<MotionToken> {
    (0..n)
        .map(|_| {
            let mut t = [0.0; 6];
            for v in &mut t {
                *v = rng.gen_range(-1.0..1.0);
            }
            MotionToken(t)
        })
        .collect()
}

fn gradient_check() -> Check {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let params = RegressorParams::init(&mut rng, 4, 3.0);
        let toks: Vec<Vec<MotionToken>> = (0..3).map(|i| random_tokens(&mut rng, 3 + i)).collect();
        let batch: Vec<BatchItem> = toks
            .iter()
            .map(|t| BatchItem {
                tokens: t,
                label: rng.gen_range(10.0..60.0),
            })
            .collect();
        let (_, grad) = loss_and_grad(&params, &batch).expect("grad");
        let analytic = grad.flatten();
        let base = params.flatten();
        let mut p = params.clone();
        for i in 0..base.len() {
            let mut at = |d: f64| {
                let mut flat = base.clone();
                flat[i] += d;
                p.assign_flat(&flat);
                loss_and_grad(&p, &batch).expect("loss").0
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[i] - numeric).abs() / scale);
        }
    }
    Check::new("gradient_finite_difference", worst <= 1e-4, format!("max relative error {worst:e}"))
}

fn metric_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..20 {
        let v = rng.gen_range(1..5usize);
        let meta = [24.0, 30.0, 60.0][rng.gen_range(0..3)];
        let videos: Vec<Vec<f64>> = (0..v)
            .map(|_| (0..rng.gen_range(1..8)).map(|_| rng.gen_range(5.0..80.0)).collect())
            .collect();
        let groups: Vec<Vec<ClipPrediction>> = videos
            .iter()
            .enumerate()
            .map(|(i, fs)| {
                fs.iter()
                    .enumerate()
                    .map(|(c, &f)| ClipPrediction {
                        video_id: format!("v{i}"),
                        clip_index: c,
                        f_hat: f,
                        meta_fps: meta,
                    })
                    .collect()
            })
            .collect();
        // naive two-stage forms
        let means: Vec<f64> = videos.iter().map(|fs| fs.iter().sum::<f64>() / fs.len() as f64).collect();
        let f_model = means.iter().sum::<f64>() / v as f64;
        let mut avg = 0.0;
        let mut pct = 0.0;
        let mut intra = 0.0;
        for fs in &videos {
            let m = fs.iter().sum::<f64>() / fs.len() as f64;
            avg += fs.iter().map(|f| (f - meta).abs()).sum::<f64>() / fs.len() as f64;
            pct += fs.iter().map(|f| 100.0 * (f - meta).abs() / meta).sum::<f64>() / fs.len() as f64;
            intra += (fs.iter().map(|f| (f - m).powi(2)).sum::<f64>() / fs.len() as f64).sqrt() / m;
        }
        let (avg, pct, intra) = (avg / v as f64, pct / v as f64, intra / v as f64);
        let inter = (means.iter().map(|m| (m - f_model).powi(2)).sum::<f64>() / v as f64).sqrt() / f_model;

        let audits: Result<Vec<VideoAudit>, _> = groups.iter().map(|g| VideoAudit::from_clips(g, 0)).collect();
        let got = audits.and_then(|a| {
            let fm = model_mean(&a)?;
            let (ae, pe) = alignment_errors(&groups)?;
            let (ia, ie) = consistency_cv(&videos)?;
            let (mae, mape) = mae_mape(&means, &vec![meta; v])?;
            Ok((fm, ae, pe, ia, ie, mae, mape))
        });
        let mae = means.iter().map(|m| (m - meta).abs()).sum::<f64>() / v as f64;
        match got {
            Ok((fm, ae, pe, ia, ie, gm, gp)) => {
                for (a, b) in [
                    (fm, f_model),
                    (ae, avg),
                    (pe, pct),
                    (ia, intra),
                    (ie, inter),
                    (gm, mae),
                    (gp, 100.0 * mae / meta),
                ] {
                    worst = worst.max((a - b).abs());
                }
            }
            Err(_) => ok = false,
        }
    }
    Check::new("metric_oracle", ok && worst <= 1e-9, format!("max |diff| {worst:e} over 20 instances"))
}

fn sliding_window() -> Check {
    let spec = SceneSpec::new(Pattern::SinusoidalGrating, 60.0, 16.0, 32, 16);
    let seq = render_scene(&spec, 128.0 / 30.0, 30.0).expect("scene");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let params = RegressorParams::init(&mut rng, 4, 3.0);
    match sliding_window_predict(&seq, &params, 32, 4) {
        Ok(p) => Check::new(
            "sliding_window_count",
            seq.len() == 128 && p.len() == 25,
            format!("{} frames -> {} clips", seq.len(), p.len()),
        ),
        Err(e) => Check::new("sliding_window_count", false, e.to_string()),
    }
}

fn retime_identity_and_duration() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seq = random_sequence(&mut rng, 6, 4, 128, 30.0);
    let identity = plan_global(seq.len(), &[Some(30.0)], 30.0)
        .and_then(|p| apply_retime(&seq, &p))
        .map(|out| out.frames() == seq.frames())
        .unwrap_or(false);
    let retimed = plan_global(seq.len(), &[Some(36.0)], 30.0).and_then(|p| apply_retime(&seq, &p));
    let (count, dur_err) = match retimed {
        Ok(out) => (out.len(), (out.len() as f64 / 30.0 - 128.0 / 36.0).abs()),
        Err(_) => (0, f64::INFINITY),
    };
    Check::new(
        "retime_identity_duration",
        identity && dur_err <= 1.0 / 30.0,
        format!(
            "identity {}, 128 frames at 36 -> {count} frames at 30 (|duration error| {dur_err:.6} s)",
            if identity { "exact" } else { "broken" }
        ),
    )
}

fn bradley_terry() -> Check {
    let mut comps = vec![PairwiseComparison::new("a", "b", Winner::A); 3];
    comps.push(PairwiseComparison::new("a", "b", Winner::B));
    let closed = fit_bt(&comps, 0.0)
        .map(|f| (f.strength_of("a").unwrap_or(0.0) - 0.75).abs())
        .unwrap_or(f64::INFINITY);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ids = ["orig", "pred", "pred_dyn", "meta"];
    let mut data = Vec::new();
    for _ in 0..120 {
        let i = rng.gen_range(0..4);
        let j = (i + rng.gen_range(1..4)) % 4;
        let w = if rng.gen_bool(0.5 + 0.1 * (j as f64 - i as f64) / 3.0) { Winner::A } else { Winner::B };
        data.push(PairwiseComparison::new(ids[i], ids[j], w));
    }
    let ascent = fit_bt(&data, 0.5)
        .map(|f| f.log_likelihood.windows(2).all(|w| w[1] >= w[0]))
        .unwrap_or(false);
    let cfg = BootstrapConfig {
        n_boot: 200,
        seed: 5,
        ..Default::default()
    };
    let (repro, bracket) = match (bootstrap_ci(&data, &cfg), bootstrap_ci(&data, &cfg)) {
        (Ok(a), Ok(b)) => (
            a.to_json() == b.to_json(),
            a.variants
                .iter()
                .all(|v| v.ci_low_pct <= v.strength_pct && v.strength_pct <= v.ci_high_pct),
        ),
        _ => (false, false),
    };
    Check::new(
        "bradley_terry",
        closed <= 1e-9 && ascent && repro && bracket,
        format!(
            "3:1 closed form |diff| {closed:e}, ascent {ascent}, reproducible {repro}, point in CI {bracket}"
        ),
    )
}

fn fseq_roundtrip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let seq = random_sequence(&mut rng, 7, 5, 6, 24.0);
    let mut bytes = Vec::new();
    let ok = write_fseq(&seq, &mut bytes).is_ok()
        && match decode_fseq(&bytes, "rand") {
            Ok(back) => {
                back.len() == seq.len()
                    && back.meta_fps() == 24.0
                    && back
                        .frames()
                        .iter()
                        .zip(seq.frames())
                        .all(|(a, b)| a.quantized() == b.quantized())
            }
            Err(_) => false,
        };
    Check::new("fseq_roundtrip", ok, format!("{} bytes", bytes.len()))
}
