//! Command-line front end. `run` parses argv and returns the process exit code:
//! 0 on success, 1 on usage errors, 2 on data errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::audit::build_report;
use crate::chronometer::train::{train, TrainConfig};
use crate::chronometer::{
    loss_trace_csv, sliding_window_predict, Checkpoint, DEFAULT_STRIDE, DEFAULT_WINDOW,
};
use crate::config::*;
use crate::frame::FrameSequence;
use crate::fseq::{load_sequence, save_sequence};
use crate::preference::{bootstrap_ci, read_comparisons, BootstrapConfig};
use crate::resample::{
    build_dataset, resample, upsample_linear, DatasetConfig, ResampleSpec, Strategy, VariantInfo,
    DEFAULT_CLIP_LEN, DEFAULT_HIGH_FPS, VC_COMMON, VC_WIDE,
};
use crate::retime::{apply_retime, plan_dynamic, plan_global, relabel, RetimeMode, DEFAULT_OUTPUT_FPS};
use crate::scene::{render_scene, Pattern, SceneSpec};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "phyfps", version, propagate_version = true)]
#[command(about = "Physical frame-rate estimation, augmentation, auditing and retiming")]
struct Cli {
    /// JSON config keyed by subcommand; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render an analytic moving scene whose PhyFPS equals its capture rate
    Synth(SynthArgs),
    /// Linearly interpolate a sequence up to a higher rate
    Upsample(UpsampleArgs),
    /// Apply one camera-mechanics downsampling
    Augment(AugmentArgs),
    /// Emit every source x rate x strategy x divisor variant plus a manifest
    BuildDataset(BuildDatasetArgs),
    /// Fit the regressor; writes a checkpoint and a loss trace
    Train(TrainArgs),
    /// Sliding-window PhyFPS predictions as CSV
    Predict(PredictArgs),
    /// Alignment and consistency metrics from clip predictions
    Audit(AuditArgs),
    /// Resample a video so its motion plays at physical speed
    Retime(RetimeArgs),
    /// Bradley-Terry strengths with bootstrap intervals
    Bt(BtArgs),
    /// Run the built-in oracle and invariant checks
    Selftest,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

macro_rules! data_err {
    ($($t:tt)*) => { Failure::Data(Error::Data(format!($($t)*))) };
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn into_data<E: Into<Error>>(e: E) -> Failure {
    Failure::Data(e.into())
}

type CmdResult = Result<(), Failure>;

fn required<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| usage(format!("missing required --{flag}")))
}

fn parse_with<T: std::str::FromStr<Err = String>>(s: &str) -> Result<T, Failure> {
    s.parse().map_err(Failure::Usage)
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let file = match &cli.config {
        Some(p) => match PipelineConfig::load(p) {
            Ok(c) => c,
            Err(msg) => {
                eprintln!("error: config {msg}");
                return EXIT_USAGE;
            }
        },
        None => PipelineConfig::default(),
    };
    let result = match cli.command {
        Command::Synth(mut a) => {
            a.overlay(file.synth.unwrap_or_default());
            cmd_synth(a)
        }
        Command::Upsample(mut a) => {
            a.overlay(file.upsample.unwrap_or_default());
            cmd_upsample(a)
        }
        Command::Augment(mut a) => {
            a.overlay(file.augment.unwrap_or_default());
            cmd_augment(a)
        }
        Command::BuildDataset(mut a) => {
            a.overlay(file.build_dataset.unwrap_or_default());
            cmd_build_dataset(a)
        }
        Command::Train(mut a) => {
            a.overlay(file.train.unwrap_or_default());
            cmd_train(a)
        }
        Command::Predict(mut a) => {
            a.overlay(file.predict.unwrap_or_default());
            cmd_predict(a)
        }
        Command::Audit(mut a) => {
            a.overlay(file.audit.unwrap_or_default());
            cmd_audit(a)
        }
        Command::Retime(mut a) => {
            a.overlay(file.retime.unwrap_or_default());
            cmd_retime(a)
        }
        Command::Bt(mut a) => {
            a.overlay(file.bt.unwrap_or_default());
            cmd_bt(a)
        }
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run with --help for usage");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| data_err!("{}: {e}", path.display()))
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, contents: &str) -> CmdResult {
    match path {
        Some(p) => write_file(p, contents),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(into_data)
        }
    }
}

fn load(path: &Path) -> Result<FrameSequence, Failure> {
    load_sequence(path).map_err(|e| data_err!("{}: {e}", path.display()))
}

fn save(seq: &FrameSequence, path: &Path) -> CmdResult {
    save_sequence(seq, path).map_err(|e| data_err!("{}: {e}", path.display()))
}

/// `out.json` -> `out.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    let out = required(a.out, "out")?;
    let width = a.width.unwrap_or(64);
    let height = a.height.unwrap_or(64);
    let spec = match a.seed {
        Some(seed) => {
            let lo = a.speed_min.unwrap_or(20.0);
            let hi = a.speed_max.unwrap_or(60.0);
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(usage(format!("bad speed range [{lo}, {hi}]")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            SceneSpec::sample(&mut rng, width, height, (lo, hi))
        }
        None => {
            let pattern: Pattern = parse_with(a.pattern.as_deref().unwrap_or("blob"))?;
            let scale = a.scale.unwrap_or(match pattern {
                Pattern::TranslatingGaussianBlob => 4.0,
                Pattern::SinusoidalGrating => 16.0,
                Pattern::BouncingDisc => 6.0,
            });
            let mut s = SceneSpec::new(pattern, a.velocity.unwrap_or(40.0), scale, width, height);
            if let Some(bg) = a.background {
                s.background = bg;
            }
            s
        }
    };
    let seq = render_scene(&spec, a.duration.unwrap_or(1.0), a.fps.unwrap_or(DEFAULT_HIGH_FPS))
        .map_err(into_data)?;
    save(&seq, &out)?;
    log::info!("wrote {} frames to {}", seq.len(), out.display());
    Ok(())
}

fn cmd_upsample(a: UpsampleArgs) -> CmdResult {
    let input = required(a.input, "input")?;
    let out = required(a.out, "out")?;
    let seq = load(&input)?;
    let up = upsample_linear(&seq, a.fps.unwrap_or(DEFAULT_HIGH_FPS)).map_err(into_data)?;
    save(&up, &out)
}

fn cmd_augment(a: AugmentArgs) -> CmdResult {
    let input = required(a.input, "input")?;
    let out = required(a.out, "out")?;
    let strategy: Strategy = parse_with(&required(a.strategy, "strategy")?)?;
    let f_low = required(a.f_low, "f-low")?;
    let seq = load(&input)?;
    let f_high = a.f_high.unwrap_or(seq.meta_fps());
    let spec = ResampleSpec::new(strategy, f_high, f_low, a.divisor.unwrap_or(1))
        .map_err(|e| usage(e.to_string()))?;
    let low = resample(&seq, &spec).map_err(into_data)?;
    save(&low, &out)
}

fn cmd_build_dataset(a: BuildDatasetArgs) -> CmdResult {
    let inputs = required(a.inputs, "inputs")?;
    let out_dir = required(a.out_dir, "out-dir")?;
    let rates = match (a.rates, a.grid.as_deref()) {
        (Some(r), _) => r,
        (None, None | Some("common")) => VC_COMMON.to_vec(),
        (None, Some("wide")) => VC_WIDE.to_vec(),
        (None, Some(g)) => return Err(usage(format!("unknown grid {g:?} (common | wide)"))),
    };
    let strategies = match a.strategies {
        Some(list) => list
            .iter()
            .map(|s| parse_with::<Strategy>(s))
            .collect::<Result<Vec<_>, _>>()?,
        None => Strategy::ALL.to_vec(),
    };
    let cfg = DatasetConfig {
        rates,
        strategies,
        window_divisors: a.divisors.unwrap_or_else(|| vec![1, 2, 4]),
        clip_len: a.clip_len.unwrap_or(DEFAULT_CLIP_LEN),
        retain_sources: a.retain_sources.unwrap_or(true),
    };
    let sources = inputs
        .par_iter()
        .map(|p| load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let entries = build_dataset(&sources, &cfg).map_err(into_data)?;
    fs::create_dir_all(&out_dir).map_err(into_data)?;
    let manifest: Vec<VariantInfo> = entries
        .par_iter()
        .map(|e| {
            let name = format!("{}.fseq", e.sequence.source_id());
            save(&e.sequence, &out_dir.join(&name))?;
            let mut info = e.info.clone();
            info.output_path = name;
            Ok(info)
        })
        .collect::<Result<_, Failure>>()?;
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| data_err!("{e}"))?;
    write_file(&out_dir.join(MANIFEST_NAME), &(json + "\n"))?;
    log::info!("wrote {} variants to {}", manifest.len(), out_dir.display());
    Ok(())
}

fn read_manifest(path: &Path) -> Result<Vec<PathBuf>, Failure> {
    let raw = fs::read_to_string(path).map_err(|e| data_err!("{}: {e}", path.display()))?;
    let rows: Vec<VariantInfo> =
        serde_json::from_str(&raw).map_err(|e| data_err!("{}: {e}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    Ok(rows.iter().map(|r| dir.join(&r.output_path)).collect())
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let out = required(a.out, "out")?;
    let mut paths = a.inputs.unwrap_or_default();
    if let Some(m) = &a.manifest {
        paths.extend(read_manifest(m)?);
    }
    if paths.is_empty() {
        return Err(usage("train needs --inputs or --manifest"));
    }
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: a.learning_rate.unwrap_or(defaults.learning_rate),
        iterations: a.iterations.unwrap_or(defaults.iterations),
        batch_size: a.batch_size.unwrap_or(defaults.batch_size),
        seed: a.seed.unwrap_or(defaults.seed),
        hidden_dim: a.hidden_dim.unwrap_or(defaults.hidden_dim),
        train_clip_len: a.train_clip_len.unwrap_or(defaults.train_clip_len),
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let dataset = paths
        .par_iter()
        .map(|p| load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let outcome = train(&dataset, &cfg).map_err(into_data)?;
    if outcome.skipped > 0 {
        log::warn!("{} sequences skipped by the motion gate", outcome.skipped);
    }
    let ckpt = Checkpoint::new(&outcome.params, Some(&cfg), Some(outcome.final_loss));
    write_file(&out, &(ckpt.to_json() + "\n"))?;
    let loss_path = a.loss_csv.unwrap_or_else(|| sibling(&out, "loss.csv"));
    write_file(&loss_path, &loss_trace_csv(&outcome.loss_trace))?;
    log::info!("final loss {}", outcome.final_loss);
    Ok(())
}

type VideoPredictions = Vec<(String, Vec<Option<f64>>)>;

/// `(video_id, per-clip prediction)` for each input, in input order.
fn predict_videos(
    ckpt_path: &Path,
    inputs: &[PathBuf],
    window: usize,
    stride: usize,
) -> Result<VideoPredictions, Failure> {
    let ckpt = Checkpoint::load(ckpt_path).map_err(into_data)?;
    let params = ckpt.params().map_err(into_data)?;
    inputs
        .par_iter()
        .map(|p| {
            let seq = load(p)?;
            let preds = sliding_window_predict(&seq, &params, window, stride)
                .map_err(|e| data_err!("{}: {e}", p.display()))?;
            Ok((
                seq.source_id().to_string(),
                preds.into_iter().map(|w| w.f_hat).collect(),
            ))
        })
        .collect()
}

pub const PREDICTION_HEADER: &str = "video_id,clip_index,f_hat";

fn predictions_csv(videos: &[(String, Vec<Option<f64>>)]) -> String {
    let mut s = String::from(PREDICTION_HEADER);
    s.push('\n');
    for (vid, preds) in videos {
        for (c, f) in preds.iter().enumerate() {
            match f {
                Some(f) => s.push_str(&format!("{vid},{c},{f}\n")),
                None => s.push_str(&format!("{vid},{c},\n")),
            }
        }
    }
    s
}

/// Groups a prediction CSV by video in order of first appearance, clips sorted by index.
fn read_predictions(path: &Path) -> Result<VideoPredictions, Failure> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data_err!("{}: {e}", path.display()))?;
    let headers = rdr.headers().map_err(|e| data_err!("{e}"))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["video_id", "clip_index", "f_hat"] {
        return Err(data_err!("{}: expected header {PREDICTION_HEADER}", path.display()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, Vec<(usize, Option<f64>)>> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| data_err!("{}: {e}", path.display()))?;
        let bad = |what: &str| data_err!("{}: row {}: bad {what}", path.display(), line + 2);
        let vid = rec[0].to_string();
        let clip: usize = rec[1].trim().parse().map_err(|_| bad("clip_index"))?;
        let f = match rec[2].trim() {
            "" => None,
            t => Some(t.parse::<f64>().map_err(|_| bad("f_hat"))?),
        };
        if !rows.contains_key(&vid) {
            order.push(vid.clone());
        }
        rows.entry(vid).or_default().push((clip, f));
    }
    Ok(order
        .into_iter()
        .map(|vid| {
            let mut clips = rows.remove(&vid).unwrap_or_default();
            clips.sort_by_key(|c| c.0);
            (vid, clips.into_iter().map(|c| c.1).collect())
        })
        .collect())
}

fn cmd_predict(a: PredictArgs) -> CmdResult {
    let ckpt = required(a.checkpoint, "checkpoint")?;
    let inputs = required(a.inputs, "inputs")?;
    let videos = predict_videos(
        &ckpt,
        &inputs,
        a.window.unwrap_or(DEFAULT_WINDOW),
        a.stride.unwrap_or(DEFAULT_STRIDE),
    )?;
    emit(a.out.as_deref(), &predictions_csv(&videos))
}

fn read_meta_table(path: &Path) -> Result<BTreeMap<String, f64>, Failure> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data_err!("{}: {e}", path.display()))?;
    let mut table = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| data_err!("{}: {e}", path.display()))?;
        if rec.len() != 2 {
            return Err(data_err!("{}: expected video_id,meta_fps rows", path.display()));
        }
        let fps: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| data_err!("{}: bad meta_fps {:?}", path.display(), &rec[1]))?;
        table.insert(rec[0].to_string(), fps);
    }
    Ok(table)
}

fn cmd_audit(a: AuditArgs) -> CmdResult {
    let preds_path = required(a.predictions, "predictions")?;
    let videos = read_predictions(&preds_path)?;
    let mut meta = match &a.meta_table {
        Some(p) => read_meta_table(p)?,
        None => BTreeMap::new(),
    };
    for (vid, _) in &videos {
        if !meta.contains_key(vid) {
            match a.meta_fps {
                Some(f) => {
                    meta.insert(vid.clone(), f);
                }
                None => return Err(usage(format!("no meta fps for {vid}; pass --meta-fps or --meta-table"))),
            }
        }
    }
    let model_id = a.model_id.unwrap_or_else(|| "model".to_string());
    let report = build_report(&model_id, &videos, &meta).map_err(into_data)?;
    if let Some(csv_path) = &a.csv {
        write_file(csv_path, &report.to_csv())?;
    }
    emit(a.out.as_deref(), &(report.to_json() + "\n"))
}

fn cmd_retime(a: RetimeArgs) -> CmdResult {
    let input = required(a.input, "input")?;
    let out = required(a.out, "out")?;
    let mode: RetimeMode = parse_with(a.mode.as_deref().unwrap_or("global"))?;
    let output_fps = a.output_fps.unwrap_or(DEFAULT_OUTPUT_FPS);
    let window = a.window.unwrap_or(DEFAULT_WINDOW);
    let stride = a.stride.unwrap_or(DEFAULT_STRIDE);
    let relabel_only = a.relabel_only.unwrap_or(false);
    if relabel_only && mode != RetimeMode::Global {
        return Err(usage("--relabel-only needs --mode global"));
    }
    let video = load(&input)?;
    let preds = match (&a.predictions, &a.checkpoint) {
        (Some(p), None) => {
            let id = video.source_id();
            read_predictions(p)?
                .into_iter()
                .find(|(vid, _)| vid == id)
                .map(|(_, c)| c)
                .ok_or_else(|| data_err!("{}: no predictions for {id}", p.display()))?
        }
        (None, Some(c)) => predict_videos(c, std::slice::from_ref(&input), window, stride)?
            .pop()
            .map(|(_, c)| c)
            .unwrap_or_default(),
        _ => return Err(usage("retime needs exactly one of --predictions or --checkpoint")),
    };
    let plan = match mode {
        RetimeMode::Global => plan_global(video.len(), &preds, output_fps),
        RetimeMode::Dynamic => plan_dynamic(video.len(), &preds, window, stride, output_fps),
    }
    .map_err(into_data)?;
    let result = if relabel_only {
        relabel(&video, &plan)
    } else {
        apply_retime(&video, &plan)
    }
    .map_err(into_data)?;
    save(&result, &out)?;
    let plan_path = a.plan.unwrap_or_else(|| sibling(&out, "plan.json"));
    write_file(&plan_path, &(plan.to_json() + "\n"))
}

fn cmd_bt(a: BtArgs) -> CmdResult {
    let input = required(a.input, "input")?;
    let defaults = BootstrapConfig::default();
    let cfg = BootstrapConfig {
        n_boot: a.n_boot.unwrap_or(defaults.n_boot),
        level: a.level.unwrap_or(defaults.level),
        seed: a.seed.unwrap_or(defaults.seed),
        pseudo_count: a.pseudo_count.unwrap_or(defaults.pseudo_count),
    };
    let file = fs::File::open(&input).map_err(|e| data_err!("{}: {e}", input.display()))?;
    let comps = read_comparisons(file).map_err(into_data)?;
    let result = bootstrap_ci(&comps, &cfg).map_err(into_data)?;
    emit(a.out.as_deref(), &(result.to_json() + "\n"))
}

fn cmd_selftest() -> CmdResult {
    let checks = crate::selftest::run_all();
    let mut text = String::new();
    for c in &checks {
        text.push_str(&c.line());
        text.push('\n');
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    text.push_str(&format!("{} checks, {failed} failed\n", checks.len()));
    emit(None, &text)?;
    if failed > 0 {
        return Err(data_err!("{failed} selftest checks failed"));
    }
    Ok(())
}
