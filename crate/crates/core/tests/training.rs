use phyfps::chronometer::train::{dataset_loss, prepare_samples, train_on_tokens, TokenSample, TrainConfig};
use phyfps::resample::{build_dataset, DatasetConfig, VC_COMMON};
use phyfps::scene::{render_scene, SceneSpec};
use phyfps::Strategy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn samples() -> Vec<TokenSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let srcs: Vec<_> = (0..8)
        .map(|i| {
            let spec = SceneSpec::sample(&mut rng, 48, 48, (36.0, 44.0));
            render_scene(&spec, 4.2, 240.0).unwrap().with_source_id(format!("s{i}"))
        })
        .collect();
    let cfg = DatasetConfig {
        rates: VC_COMMON.to_vec(),
        strategies: Strategy::ALL.to_vec(),
        window_divisors: vec![1, 2, 4],
        clip_len: 48,
        retain_sources: false,
    };
    let clips: Vec<_> = build_dataset(&srcs, &cfg).unwrap().into_iter().map(|e| e.sequence).collect();
    prepare_samples(&clips).unwrap().0
}

fn block_medians(trace: &[f64], block: usize) -> Vec<f64> {
    trace
        .chunks_exact(block)
        .map(|c| {
            let mut v = c.to_vec();
            v.sort_by(f64::total_cmp);
            (v[block / 2 - 1] + v[block / 2]) / 2.0
        })
        .collect()
}

// Minibatch noise makes single steps go up; the block medians over the
// early phase should not.
#[test]
fn loss_trace_descends_in_early_phase() {
    let samples = samples();
    for seed in 0..4 {
        let cfg = TrainConfig { iterations: 300, seed, ..TrainConfig::default() };
        let out = train_on_tokens(&samples, &cfg).unwrap();
        assert_eq!(out.loss_trace.len(), 300);
        let med = block_medians(&out.loss_trace, 50);
        for w in med.windows(2) {
            assert!(w[1] <= w[0], "seed {seed}: block medians {med:?}");
        }
        assert!(med[5] < 0.5 * med[0], "seed {seed}: {med:?}");
    }
}

#[test]
fn training_improves_full_dataset_loss_and_is_deterministic() {
    let samples = samples();
    let cfg = TrainConfig { iterations: 400, seed: 3, ..TrainConfig::default() };
    let a = train_on_tokens(&samples, &cfg).unwrap();
    let b = train_on_tokens(&samples, &cfg).unwrap();
    assert_eq!(a.params.flatten(), b.params.flatten());
    assert_eq!(a.loss_trace, b.loss_trace);

    let short = train_on_tokens(&samples, &TrainConfig { iterations: 1, ..cfg.clone() }).unwrap();
    let before = dataset_loss(&short.params, &samples, cfg.train_clip_len).unwrap();
    let after = dataset_loss(&a.params, &samples, cfg.train_clip_len).unwrap();
    assert!(after < before, "{after} !< {before}");
}
