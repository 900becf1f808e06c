//! C ABI over the phyfps toolkit.
//!
//! Objects cross the boundary as opaque handles created by `*_load`,
//! `*_render`, etc. and released with the matching `*_free`. Every fallible
//! call returns a [`PhyfpsStatus`]; on failure a message is available from
//! [`phyfps_last_error`] until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use phyfps::audit::{mae_mape, AuditError};
use phyfps::chronometer::head::{loss_log_mse, RegressorParams};
use phyfps::chronometer::{
    predict_log_phyfps, sliding_window_predict, window_count, Checkpoint, ChronoError,
};
use phyfps::fseq::{load_sequence, save_sequence, FormatError};
use phyfps::resample::{resample, upsample_linear, ResampleError};
use phyfps::retime::{apply_retime, plan_global, RetimeError};
use phyfps::scene::{render_scene, Pattern, SceneError, SceneSpec};
use phyfps::{Frame, FrameSequence, ResampleSpec, Strategy};

/// Bumped on any incompatible change to this interface.
pub const PHYFPS_ABI_VERSION: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhyfpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    /// Input data violates a precondition (too short, wrong rate, ...).
    Data = 5,
    /// The clip is too static for its PhyFPS to be observable.
    InsufficientMotion = 6,
    /// Output buffer too small; the required length was written.
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhyfpsStrategy {
    Sharp = 0,
    Blur = 1,
    RollingShutter = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhyfpsPattern {
    Blob = 0,
    Grating = 1,
    Disc = 2,
}

/// Opaque frame sequence.
pub struct PhyfpsSequence(FrameSequence);

/// Opaque regressor parameters.
pub struct PhyfpsModel(RegressorParams);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PhyfpsSequenceInfo {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub meta_fps: f64,
    /// NaN when the sequence is unlabeled.
    pub phy_fps_label: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: PhyfpsStatus, msg: impl std::fmt::Display) -> PhyfpsStatus {
    set_error(msg.to_string());
    status
}

fn chrono_status(e: ChronoError) -> PhyfpsStatus {
    let status = match e {
        ChronoError::InsufficientMotion { .. } => PhyfpsStatus::InsufficientMotion,
        ChronoError::InvalidConfig(_) => PhyfpsStatus::InvalidArgument,
        _ => PhyfpsStatus::Data,
    };
    fail(status, e)
}

fn format_status(e: FormatError) -> PhyfpsStatus {
    match e {
        FormatError::Io(_) => fail(PhyfpsStatus::Io, e),
        _ => fail(PhyfpsStatus::Format, e),
    }
}

fn resample_status(e: ResampleError) -> PhyfpsStatus {
    match e {
        ResampleError::InvalidSpec(_) | ResampleError::LowAboveHigh { .. } => {
            fail(PhyfpsStatus::InvalidArgument, e)
        }
        _ => fail(PhyfpsStatus::Data, e),
    }
}

fn scene_status(e: SceneError) -> PhyfpsStatus {
    fail(PhyfpsStatus::InvalidArgument, e)
}

fn audit_status(e: AuditError) -> PhyfpsStatus {
    fail(PhyfpsStatus::InvalidArgument, e)
}

fn retime_status(e: RetimeError) -> PhyfpsStatus {
    fail(PhyfpsStatus::Data, e)
}

/// Clears the error slot, runs `f`, and turns a panic into `Panic`.
fn guard(f: impl FnOnce() -> PhyfpsStatus) -> PhyfpsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(PhyfpsStatus::Panic, msg)
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, PhyfpsStatus> {
    if p.is_null() {
        return Err(fail(PhyfpsStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(PhyfpsStatus::InvalidArgument, "path is not UTF-8"))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], PhyfpsStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(PhyfpsStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $( if $p.is_null() {
            return fail(PhyfpsStatus::NullPointer, concat!(stringify!($p), " is null"));
        } )+
    };
}

unsafe fn emit_sequence(seq: FrameSequence, out: *mut *mut PhyfpsSequence) -> PhyfpsStatus {
    *out = Box::into_raw(Box::new(PhyfpsSequence(seq)));
    PhyfpsStatus::Ok
}

#[no_mangle]
pub extern "C" fn phyfps_abi_version() -> u32 {
    PHYFPS_ABI_VERSION
}

/// Message for the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next phyfps call on this thread.
#[no_mangle]
pub extern "C" fn phyfps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a `.fseq` file or a PGM directory.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn phyfps_sequence_load(
    path: *const c_char,
    out: *mut *mut PhyfpsSequence,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(out);
        let path = try_status!(path_arg(path));
        match load_sequence(path) {
            Ok(seq) => emit_sequence(seq, out),
            Err(e) => format_status(e),
        }
    })
}

/// # Safety
/// `seq` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn phyfps_sequence_save(
    seq: *const PhyfpsSequence,
    path: *const c_char,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(seq);
        let path = try_status!(path_arg(path));
        match save_sequence(&(*seq).0, path) {
            Ok(()) => PhyfpsStatus::Ok,
            Err(e) => format_status(e),
        }
    })
}

/// Builds a sequence from `frame_count * height * width` row-major samples in [0, 1].
/// Pass NaN for `phy_fps_label` to leave it unlabeled.
///
/// # Safety
/// `samples` must point to that many doubles.
#[no_mangle]
pub unsafe extern "C" fn phyfps_sequence_from_samples(
    width: usize,
    height: usize,
    frame_count: usize,
    samples: *const f64,
    meta_fps: f64,
    phy_fps_label: f64,
    out: *mut *mut PhyfpsSequence,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(out);
        let per = match width.checked_mul(height) {
            Some(p) if p > 0 => p,
            _ => return fail(PhyfpsStatus::InvalidArgument, "width and height must be nonzero"),
        };
        let total = match per.checked_mul(frame_count) {
            Some(t) => t,
            None => return fail(PhyfpsStatus::InvalidArgument, "sample count overflows"),
        };
        let data = try_status!(slice_arg(samples, total, "samples"));
        let frames: Result<Vec<Frame>, _> = data
            .chunks(per)
            .map(|c| Frame::new(width, height, c.to_vec()))
            .collect();
        let label = (!phy_fps_label.is_nan()).then_some(phy_fps_label);
        match frames.and_then(|f| FrameSequence::new(f, meta_fps, label, "ffi")) {
            Ok(seq) => emit_sequence(seq, out),
            Err(e) => fail(PhyfpsStatus::InvalidArgument, e),
        }
    })
}

/// Renders an analytic scene; its PhyFPS label equals `fps`.
/// `pattern` is a `PhyfpsPattern` value.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn phyfps_sequence_render(
    pattern: u32,
    velocity: f64,
    spatial_scale: f64,
    width: usize,
    height: usize,
    duration: f64,
    fps: f64,
    out: *mut *mut PhyfpsSequence,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(out);
        let pattern = match pattern {
            p if p == PhyfpsPattern::Blob as u32 => Pattern::TranslatingGaussianBlob,
            p if p == PhyfpsPattern::Grating as u32 => Pattern::SinusoidalGrating,
            p if p == PhyfpsPattern::Disc as u32 => Pattern::BouncingDisc,
            p => return fail(PhyfpsStatus::InvalidArgument, format!("unknown pattern {p}")),
        };
        let spec = SceneSpec::new(pattern, velocity, spatial_scale, width, height);
        match render_scene(&spec, duration, fps) {
            Ok(seq) => emit_sequence(seq, out),
            Err(e) => scene_status(e),
        }
    })
}

/// # Safety
/// `seq` must be a live handle; `info` writable.
#[no_mangle]
pub unsafe extern "C" fn phyfps_sequence_info(
    seq: *const PhyfpsSequence,
    info: *mut PhyfpsSequenceInfo,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(seq, info);
        let s = &(*seq).0;
        *info = PhyfpsSequenceInfo {
            width: s.width(),
            height: s.height(),
            frame_count: s.len(),
            meta_fps: s.meta_fps(),
            phy_fps_label: s.phy_fps_label().unwrap_or(f64::NAN),
        };
        PhyfpsStatus::Ok
    })
}

/// Copies frame `index` (`width * height` doubles, row-major) into `dst`.
///
/// # Safety
/// `dst` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn phyfps_sequence_frame(
    seq: *const PhyfpsSequence,
    index: usize,
    dst: *mut f64,
    capacity: usize,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(seq, dst);
        let s = &(*seq).0;
        let Some(frame) = s.frames().get(index) else {
            return fail(
                PhyfpsStatus::InvalidArgument,
                format!("frame {index} out of range ({} frames)", s.len()),
            );
        };
        let px = frame.samples();
        if capacity < px.len() {
            return fail(
                PhyfpsStatus::BufferTooSmall,
                format!("need {} samples, got {capacity}", px.len()),
            );
        }
        ptr::copy_nonoverlapping(px.as_ptr(), dst, px.len());
        PhyfpsStatus::Ok
    })
}

/// # Safety
/// `seq` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn phyfps_sequence_free(seq: *mut PhyfpsSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Camera-mechanics downsampling from `f_high` to `f_low`.
/// `strategy` is a `PhyfpsStrategy` value.
///
/// # Safety
/// `seq` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn phyfps_resample(
    seq: *const PhyfpsSequence,
    strategy: u32,
    f_high: f64,
    f_low: f64,
    window_divisor: u32,
    out: *mut *mut PhyfpsSequence,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(seq, out);
        let strategy = match strategy {
            s if s == PhyfpsStrategy::Sharp as u32 => Strategy::Sharp,
            s if s == PhyfpsStrategy::Blur as u32 => Strategy::Blur,
            s if s == PhyfpsStrategy::RollingShutter as u32 => Strategy::RollingShutter,
            s => return fail(PhyfpsStatus::InvalidArgument, format!("unknown strategy {s}")),
        };
        let spec = match ResampleSpec::new(strategy, f_high, f_low, window_divisor) {
            Ok(s) => s,
            Err(e) => return resample_status(e),
        };
        match resample(&(*seq).0, &spec) {
            Ok(low) => emit_sequence(low, out),
            Err(e) => resample_status(e),
        }
    })
}

/// # Safety
/// `seq` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn phyfps_upsample(
    seq: *const PhyfpsSequence,
    target_fps: f64,
    out: *mut *mut PhyfpsSequence,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(seq, out);
        match upsample_linear(&(*seq).0, target_fps) {
            Ok(up) => emit_sequence(up, out),
            Err(e) => resample_status(e),
        }
    })
}

/// Uniformly retimes to `rate` physical fps, played back at `output_fps`.
///
/// # Safety
/// `seq` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn phyfps_retime_global(
    seq: *const PhyfpsSequence,
    rate: f64,
    output_fps: f64,
    out: *mut *mut PhyfpsSequence,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(seq, out);
        let s = &(*seq).0;
        match plan_global(s.len(), &[Some(rate)], output_fps).and_then(|p| apply_retime(s, &p)) {
            Ok(r) => emit_sequence(r, out),
            Err(e) => retime_status(e),
        }
    })
}

unsafe fn emit_model(params: RegressorParams, out: *mut *mut PhyfpsModel) -> PhyfpsStatus {
    *out = Box::into_raw(Box::new(PhyfpsModel(params)));
    PhyfpsStatus::Ok
}

/// Loads a checkpoint JSON file written by `phyfps train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn phyfps_model_load(
    path: *const c_char,
    out: *mut *mut PhyfpsModel,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(out);
        let path = try_status!(path_arg(path));
        match Checkpoint::load(path).and_then(|c| c.params()) {
            Ok(p) => emit_model(p, out),
            Err(ChronoError::Checkpoint(msg)) => fail(PhyfpsStatus::Format, msg),
            Err(e) => chrono_status(e),
        }
    })
}

/// Parses checkpoint JSON from a NUL-terminated string.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn phyfps_model_from_json(
    json: *const c_char,
    out: *mut *mut PhyfpsModel,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(json, out);
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(PhyfpsStatus::InvalidArgument, "json is not UTF-8");
        };
        match Checkpoint::from_json(text).and_then(|c| c.params()) {
            Ok(p) => emit_model(p, out),
            Err(ChronoError::Checkpoint(msg)) => fail(PhyfpsStatus::Format, msg),
            Err(e) => chrono_status(e),
        }
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn phyfps_model_free(model: *mut PhyfpsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicted `ln(PhyFPS)` for the whole sequence as one clip.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn phyfps_predict_log(
    seq: *const PhyfpsSequence,
    model: *const PhyfpsModel,
    out: *mut f64,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(seq, model, out);
        match predict_log_phyfps(&(*seq).0, &(*model).0) {
            Ok(s) => {
                *out = s;
                PhyfpsStatus::Ok
            }
            Err(e) => chrono_status(e),
        }
    })
}

#[no_mangle]
pub extern "C" fn phyfps_window_count(frame_count: usize, window: usize, stride: usize) -> usize {
    window_count(frame_count, window, stride)
}

/// Sliding-window PhyFPS predictions; motion-gated clips are written as NaN.
///
/// `*count` receives the number of clips. If `capacity` is smaller, nothing
/// is written to `dst` and `BufferTooSmall` is returned.
///
/// # Safety
/// Handles must be live; `dst` must hold `capacity` doubles; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn phyfps_sliding_window(
    seq: *const PhyfpsSequence,
    model: *const PhyfpsModel,
    window: usize,
    stride: usize,
    dst: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(seq, model, count);
        let s = &(*seq).0;
        let n = window_count(s.len(), window, stride);
        *count = n;
        if capacity < n {
            return fail(PhyfpsStatus::BufferTooSmall, format!("need {n} slots, got {capacity}"));
        }
        non_null!(dst);
        match sliding_window_predict(s, &(*model).0, window, stride) {
            Ok(preds) => {
                for (i, p) in preds.iter().enumerate() {
                    *dst.add(i) = p.f_hat.unwrap_or(f64::NAN);
                }
                PhyfpsStatus::Ok
            }
            Err(e) => chrono_status(e),
        }
    })
}

/// Mean squared error between log-predictions and `ln(labels)`.
///
/// # Safety
/// Both arrays must hold `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn phyfps_loss_log_mse(
    log_predictions: *const f64,
    labels: *const f64,
    n: usize,
    out: *mut f64,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(out);
        let p = try_status!(slice_arg(log_predictions, n, "log_predictions"));
        let y = try_status!(slice_arg(labels, n, "labels"));
        match loss_log_mse(p, y) {
            Ok(l) => {
                *out = l;
                PhyfpsStatus::Ok
            }
            Err(e) => chrono_status(e),
        }
    })
}

/// MAE (fps) and MAPE (percent).
///
/// # Safety
/// Both arrays must hold `n` doubles; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn phyfps_mae_mape(
    predictions: *const f64,
    truths: *const f64,
    n: usize,
    mae: *mut f64,
    mape: *mut f64,
) -> PhyfpsStatus {
    guard(|| {
        non_null!(mae, mape);
        let p = try_status!(slice_arg(predictions, n, "predictions"));
        let y = try_status!(slice_arg(truths, n, "truths"));
        match mae_mape(p, y) {
            Ok((a, b)) => {
                *mae = a;
                *mape = b;
                PhyfpsStatus::Ok
            }
            Err(e) => audit_status(e),
        }
    })
}
