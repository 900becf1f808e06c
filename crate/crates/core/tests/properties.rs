use std::collections::BTreeMap;

use phyfps::audit::build_report;
use phyfps::chronometer::head::{attention_weights, query_pool, RegressorParams};
use phyfps::chronometer::tokens::{extract_tokens, MotionToken};
use phyfps::fseq::{decode_fseq, write_fseq};
use phyfps::preference::{fit_bt, PairwiseComparison, Winner};
use phyfps::resample::{motion_blur, resample, VC_COMMON};
use phyfps::retime::{apply_retime, plan_dynamic, plan_global};
use phyfps::scene::{render_scene, Pattern, SceneSpec};
use phyfps::{Frame, FrameSequence, ResampleSpec, Strategy as Capture};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sequence(w: usize, h: usize, samples: Vec<f64>, fps: f64, label: Option<f64>) -> FrameSequence {
    let frames = samples
        .chunks(w * h)
        .map(|c| Frame::new(w, h, c.to_vec()).unwrap())
        .collect();
    FrameSequence::new(frames, fps, label, "p").unwrap()
}

fn arb_sequence(max_side: usize, max_len: usize) -> impl Strategy<Value = FrameSequence> {
    (1..=max_side, 1..=max_side, 1..=max_len).prop_flat_map(|(w, h, t)| {
        (
            proptest::collection::vec(0.0..=1.0f64, w * h * t),
            1.0..500.0f64,
            proptest::option::of(2.0..500.0f64),
        )
            .prop_map(move |(s, fps, label)| sequence(w, h, s, fps, label))
    })
}

fn arb_clips() -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
    proptest::collection::vec(
        (proptest::collection::vec(1.0..200.0f64, 1..12), 1.0..120.0f64),
        1..6,
    )
}

fn report_fields(videos: &[(Vec<f64>, f64)]) -> [f64; 5] {
    let per_video: Vec<(String, Vec<Option<f64>>)> = videos
        .iter()
        .enumerate()
        .map(|(i, (c, _))| (format!("v{i}"), c.iter().map(|&f| Some(f)).collect()))
        .collect();
    let meta: BTreeMap<String, f64> = videos
        .iter()
        .enumerate()
        .map(|(i, (_, m))| (format!("v{i}"), *m))
        .collect();
    let r = build_report("m", &per_video, &meta).unwrap();
    [r.phy_fps, r.avg_error, r.pct_error, r.intra_cv, r.inter_cv]
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fseq_roundtrip_keeps_quantized_samples(seq in arb_sequence(9, 6)) {
        let mut bytes = Vec::new();
        write_fseq(&seq, &mut bytes).unwrap();
        let back = decode_fseq(&bytes, "p").unwrap();
        prop_assert_eq!((back.width(), back.height(), back.len()), (seq.width(), seq.height(), seq.len()));
        prop_assert_eq!(back.meta_fps(), seq.meta_fps());
        prop_assert_eq!(back.phy_fps_label(), seq.phy_fps_label());
        for (a, b) in seq.frames().iter().zip(back.frames()) {
            prop_assert_eq!(a.quantized(), b.quantized());
        }
    }

    #[test]
    fn blob_peak_follows_analytic_position(
        velocity in -80.0..80.0f64,
        sigma in 2.0..4.0f64,
        fps in 2.0..60.0f64,
        bright in any::<bool>(),
    ) {
        let mut spec = SceneSpec::new(Pattern::TranslatingGaussianBlob, velocity, sigma, 40, 24);
        spec.background = if bright { 0.2 } else { 0.8 };
        let seq = render_scene(&spec, 4.0 / fps.min(4.0) + 1.0, fps).unwrap();
        prop_assert_eq!(&seq, &render_scene(&spec, 4.0 / fps.min(4.0) + 1.0, fps).unwrap());
        for (k, f) in seq.frames().iter().enumerate() {
            let mut best = (0, -1.0);
            for y in 0..24 {
                for x in 0..40 {
                    let d = (f.at(x, y) - spec.background).abs();
                    if d > best.1 {
                        best = (x, d);
                    }
                }
            }
            let want = spec.position_at(k as f64 / fps);
            let gap = (best.0 as f64 - want).rem_euclid(40.0);
            prop_assert!(gap.min(40.0 - gap) <= 1.0, "frame {} peak {} analytic {}", k, best.0, want);
        }
    }

    #[test]
    fn every_variant_is_labelled_at_f_low(
        seq in arb_sequence(6, 60),
        strategy in prop::sample::select(Capture::ALL.to_vec()),
        f_low in prop::sample::select(vec![10.0, 12.0, 18.0, 24.0, 30.0, 60.0]),
        divisor in prop::sample::select(vec![1u32, 2, 4]),
    ) {
        let seq = seq.relabeled(240.0, Some(240.0)).unwrap();
        let spec = ResampleSpec::new(strategy, 240.0, f_low, divisor).unwrap();
        if let Ok(out) = resample(&seq, &spec) {
            prop_assert_eq!(out.phy_fps_label(), Some(f_low));
            prop_assert_eq!(out.meta_fps(), f_low);
        }
    }

    #[test]
    fn source_indices_are_monotone(f_high in 1.0..480.0f64, frac in 0.01..=1.0f64) {
        let f_low = f_high * frac;
        let spec = ResampleSpec::new(Capture::Sharp, f_high, f_low, 1).unwrap();
        for k in 0..200 {
            let (a, b) = (spec.source_index(k), spec.source_index(k + 1));
            prop_assert!(b > a, "N = {} at k = {}", spec.ratio(), k);
        }
    }

    #[test]
    fn blur_preserves_mean_of_consumed_frames(
        seq in arb_sequence(5, 48),
        f_low in prop::sample::select(vec![20.0, 24.0, 30.0, 40.0, 60.0]),
        divisor in prop::sample::select(vec![1u32, 2, 4]),
    ) {
        let seq = seq.relabeled(240.0, Some(240.0)).unwrap();
        let spec = ResampleSpec::new(Capture::Blur, 240.0, f_low, divisor).unwrap();
        let Ok(out) = motion_blur(&seq, &spec) else { return Ok(()) };
        let m = spec.window();
        let mut consumed = 0.0;
        let mut count = 0usize;
        for k in 0..out.len() {
            for i in spec.source_index(k)..spec.source_index(k) + m {
                consumed += seq.frames()[i].samples().iter().sum::<f64>();
                count += seq.frames()[i].samples().len();
            }
        }
        let emitted: f64 = out.frames().iter().map(|f| f.samples().iter().sum::<f64>()).sum();
        let n = (out.len() * out.width() * out.height()) as f64;
        prop_assert!((emitted / n - consumed / count as f64).abs() <= 1e-9);
    }

    #[test]
    fn pooling_accepts_any_length(len in 1usize..128, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = RegressorParams::init(&mut rng, 16, 3.0);
        let tokens: Vec<MotionToken> = (0..len)
            .map(|_| MotionToken(std::array::from_fn(|_| rng.gen_range(-3.0..3.0))))
            .collect();
        let pooled = query_pool(&tokens, &params).unwrap();
        prop_assert_eq!(pooled.len(), 16);
        let w = attention_weights(&tokens, &params).unwrap();
        prop_assert_eq!(w.len(), len);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn audit_scales_with_rates(videos in arb_clips(), exp in -4i32..5, lambda in 0.1..10.0f64) {
        let base = report_fields(&videos);
        // a power of two scales every intermediate exactly
        let p = 2f64.powi(exp);
        let scaled: Vec<_> = videos.iter().map(|(c, m)| (c.iter().map(|f| f * p).collect(), m * p)).collect();
        let s = report_fields(&scaled);
        prop_assert_eq!([s[0], s[1]], [base[0] * p, base[1] * p]);
        prop_assert_eq!(&s[2..], &base[2..]);

        let scaled: Vec<_> = videos.iter().map(|(c, m)| (c.iter().map(|f| f * lambda).collect(), m * lambda)).collect();
        let s = report_fields(&scaled);
        prop_assert!(close(s[0], base[0] * lambda, 1e-12) && close(s[1], base[1] * lambda, 1e-12));
        for i in 2..5 {
            prop_assert!((s[i] - base[i]).abs() <= 1e-9 * base[i].abs().max(1.0), "field {}", i);
        }
    }

    #[test]
    fn audit_ignores_order(videos in arb_clips(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = report_fields(&videos);
        let mut shuffled = videos.clone();
        for (clips, _) in &mut shuffled {
            clips.shuffle(&mut rng);
        }
        shuffled.shuffle(&mut rng);
        let s = report_fields(&shuffled);
        for i in 0..5 {
            prop_assert!((s[i] - base[i]).abs() <= 1e-9 * base[i].abs().max(1.0), "field {}", i);
        }
    }

    #[test]
    fn retime_duration_matches_plan(
        len in 32usize..150,
        rates in proptest::collection::vec(proptest::option::of(8.0..120.0f64), 30),
        output in prop::sample::select(vec![24.0, 25.0, 30.0, 60.0]),
    ) {
        let rates = &rates[..(len - 32) / 4 + 1];
        prop_assume!(rates.iter().any(Option::is_some));
        let video = sequence(2, 2, (0..len * 4).map(|i| (i % 7) as f64 / 7.0).collect(), 30.0, None);
        for plan in [
            plan_global(len, rates, output).unwrap(),
            plan_dynamic(len, rates, 32, 4, output).unwrap(),
        ] {
            let out = apply_retime(&video, &plan).unwrap();
            prop_assert_eq!(out.meta_fps(), output);
            let r_last = plan.rate_of(len - 1).unwrap();
            let grid = ((plan.physical_duration() - 1.0 / r_last) * output + 1e-9).floor() as usize + 1;
            prop_assert_eq!(out.len(), grid);
            // the grid rule stops at the last frame's timestamp, so the last
            // frame's own 1/r only fits inside one output quantum when r_last >= output
            if r_last >= output {
                prop_assert!((out.len() as f64 / output - plan.physical_duration()).abs() <= 1.0 / output + 1e-12);
            }
        }
    }

    #[test]
    fn constant_predictions_make_dynamic_equal_global(
        len in 32usize..150,
        rate in 8.0..120.0f64,
        output in prop::sample::select(vec![24.0, 30.0, 60.0]),
    ) {
        let video = sequence(3, 2, (0..len * 6).map(|i| (i % 11) as f64 / 11.0).collect(), 30.0, None);
        let preds = vec![Some(rate); (len - 32) / 4 + 1];
        let g = apply_retime(&video, &plan_global(len, &preds, output).unwrap()).unwrap();
        let d = apply_retime(&video, &plan_dynamic(len, &preds, 32, 4, output).unwrap()).unwrap();
        prop_assert_eq!(g.frames(), d.frames());
    }

    #[test]
    fn bt_normalised_and_scale_stable(
        games in proptest::collection::vec((0usize..4, 1usize..4, any::<bool>()), 3..60),
        factor in 2usize..5,
    ) {
        let comps: Vec<PairwiseComparison> = games
            .iter()
            .map(|&(i, d, a)| {
                let j = (i + d) % 4;
                PairwiseComparison::new(&format!("v{i}"), &format!("v{j}"), if a { Winner::A } else { Winner::B })
            })
            .collect();
        let fit = fit_bt(&comps, 0.5).unwrap();
        prop_assert!((fit.strengths.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(fit.log_likelihood.windows(2).all(|w| w[1] >= w[0]));

        let more: Vec<PairwiseComparison> = comps.iter().flat_map(|c| std::iter::repeat(c.clone()).take(factor)).collect();
        let scaled = fit_bt(&more, 0.5 * factor as f64).unwrap();
        let order = |s: &[f64]| {
            let mut idx: Vec<usize> = (0..s.len()).collect();
            idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
            idx
        };
        prop_assert_eq!(&fit.ids, &scaled.ids);
        // ties may break either way; compare only clearly separated strengths
        let (o1, o2) = (order(&fit.strengths), order(&scaled.strengths));
        for (a, b) in o1.iter().zip(&o2) {
            if a != b {
                prop_assert!((fit.strengths[*a] - fit.strengths[*b]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn two_player_fit_matches_win_rate(wins_a in 0usize..20, wins_b in 0usize..20, pseudo in prop::sample::select(vec![0.5, 1.0, 2.0])) {
        prop_assume!(wins_a + wins_b > 0);
        let mut comps = vec![PairwiseComparison::new("A", "B", Winner::A); wins_a];
        comps.extend(vec![PairwiseComparison::new("A", "B", Winner::B); wins_b]);
        let fit = fit_bt(&comps, pseudo).unwrap();
        let (pa, pb) = (fit.strength_of("A").unwrap(), fit.strength_of("B").unwrap());
        let rate = (wins_a as f64 + pseudo) / ((wins_a + wins_b) as f64 + 2.0 * pseudo);
        prop_assert!((pa / (pa + pb) - rate).abs() <= 1e-9);
    }
}

#[test]
fn grating_displacement_falls_with_rate() {
    let spec = SceneSpec::new(Pattern::SinusoidalGrating, 40.0, 16.0, 48, 32);
    let high = render_scene(&spec, 1.0, 240.0).unwrap();
    let mut last = f64::INFINITY;
    for &f in VC_COMMON.iter() {
        let low = resample(&high, &ResampleSpec::new(Capture::Sharp, 240.0, f, 1).unwrap()).unwrap();
        let tokens = extract_tokens(&low).unwrap();
        let d = tokens.iter().map(|t| t.mean_displacement()).sum::<f64>() / tokens.len() as f64;
        assert!(d < last, "{f} fps: {d} !< {last}");
        last = d;
    }
}
