use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use phyfps_ffi::*;

fn last_error() -> String {
    let p = phyfps_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn render(pattern: PhyfpsPattern, velocity: f64, frames: usize, fps: f64) -> *mut PhyfpsSequence {
    let mut seq = ptr::null_mut();
    let st = unsafe {
        phyfps_sequence_render(pattern as u32, velocity, 16.0, 32, 16, frames as f64 / fps, fps, &mut seq)
    };
    assert_eq!(st, PhyfpsStatus::Ok);
    seq
}

fn info(seq: *const PhyfpsSequence) -> PhyfpsSequenceInfo {
    let mut i = PhyfpsSequenceInfo::default();
    assert_eq!(unsafe { phyfps_sequence_info(seq, &mut i) }, PhyfpsStatus::Ok);
    i
}

/// Checkpoint with zero weights and output bias `ln(fps)`: predicts `fps` for any moving clip.
fn constant_model(fps: f64) -> *mut PhyfpsModel {
    let h = 4;
    let zeros = |r: usize, c: usize| vec![vec![0.0; c]; r];
    let json = serde_json::json!({
        "version": 1, "D": 6, "H": h,
        "query": vec![0.0; h],
        "key_proj": zeros(6, h), "value_proj": zeros(6, h),
        "mlp_w1": zeros(h, h), "mlp_b1": vec![0.0; h],
        "mlp_w2": vec![0.0; h], "mlp_b2": fps.ln(),
        "train_config": null, "final_loss": null
    });
    let text = CString::new(json.to_string()).unwrap();
    let mut model = ptr::null_mut();
    let st = unsafe { phyfps_model_from_json(text.as_ptr(), &mut model) };
    assert_eq!(st, PhyfpsStatus::Ok, "{}", if st == PhyfpsStatus::Ok { String::new() } else { last_error() });
    model
}

#[test]
fn abi_version_matches_header() {
    assert_eq!(phyfps_abi_version(), PHYFPS_ABI_VERSION);
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/phyfps.h")).unwrap();
    assert!(header.contains(&format!("#define PHYFPS_ABI_VERSION {PHYFPS_ABI_VERSION}")));
    for f in [
        "phyfps_sequence_load",
        "phyfps_sequence_free",
        "phyfps_resample",
        "phyfps_sliding_window",
        "phyfps_last_error",
        "phyfps_model_free",
    ] {
        assert!(header.contains(f), "{f} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"phyfps.h\"\nint main(void) { PhyfpsSequence *s = 0; PhyfpsStatus st = phyfps_sequence_load(\"x\", &s); phyfps_sequence_free(s); return st == PHYFPS_STATUS_OK; }\n",
    )
    .unwrap();
    match Command::new(&cc).arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(&include).arg(&src).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(e) => eprintln!("skipping: no C compiler ({e})"),
    }
}

#[test]
fn render_resample_roundtrip_through_file() {
    let seq = render(PhyfpsPattern::Grating, 60.0, 240, 240.0);
    let i = info(seq);
    assert_eq!((i.width, i.height, i.frame_count), (32, 16, 240));
    assert_eq!(i.phy_fps_label, 240.0);

    let mut low = ptr::null_mut();
    let st = unsafe { phyfps_resample(seq, PhyfpsStrategy::Sharp as u32, 240.0, 24.0, 1, &mut low) };
    assert_eq!(st, PhyfpsStatus::Ok);
    let li = info(low);
    assert_eq!(li.frame_count, 24);
    assert_eq!(li.meta_fps, 24.0);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("low.fseq").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { phyfps_sequence_save(low, path.as_ptr()) }, PhyfpsStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { phyfps_sequence_load(path.as_ptr(), &mut back) }, PhyfpsStatus::Ok);
    assert_eq!(info(back).frame_count, 24);

    let mut a = vec![0.0; 32 * 16];
    let mut b = vec![0.0; 32 * 16];
    unsafe {
        assert_eq!(phyfps_sequence_frame(low, 3, a.as_mut_ptr(), a.len()), PhyfpsStatus::Ok);
        assert_eq!(phyfps_sequence_frame(back, 3, b.as_mut_ptr(), b.len()), PhyfpsStatus::Ok);
    }
    // the file stores 8-bit samples
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 0.5 / 255.0 + 1e-12);
    }
    unsafe {
        phyfps_sequence_free(seq);
        phyfps_sequence_free(low);
        phyfps_sequence_free(back);
    }
}

#[test]
fn sliding_window_reports_count_and_fills_buffer() {
    let seq = render(PhyfpsPattern::Grating, 60.0, 128, 30.0);
    let model = constant_model(30.0);
    let mut count = 0usize;
    let st = unsafe { phyfps_sliding_window(seq, model, 32, 4, ptr::null_mut(), 0, &mut count) };
    assert_eq!(st, PhyfpsStatus::BufferTooSmall);
    assert_eq!(count, 25);
    assert_eq!(phyfps_window_count(128, 32, 4), 25);

    let mut buf = vec![0.0; count];
    let st = unsafe { phyfps_sliding_window(seq, model, 32, 4, buf.as_mut_ptr(), buf.len(), &mut count) };
    assert_eq!(st, PhyfpsStatus::Ok);
    for f in &buf {
        assert!((f - 30.0).abs() < 1e-9);
    }
    let mut s = 0.0;
    assert_eq!(unsafe { phyfps_predict_log(seq, model, &mut s) }, PhyfpsStatus::Ok);
    assert!((s - 30f64.ln()).abs() < 1e-12);
    unsafe {
        phyfps_model_free(model);
        phyfps_sequence_free(seq);
    }
}

#[test]
fn static_clip_is_insufficient_motion() {
    let seq = render(PhyfpsPattern::Grating, 0.0, 40, 30.0);
    let model = constant_model(30.0);
    let mut s = 0.0;
    let st = unsafe { phyfps_predict_log(seq, model, &mut s) };
    assert_eq!(st, PhyfpsStatus::InsufficientMotion);
    assert!(last_error().contains("motion"));
    unsafe {
        phyfps_model_free(model);
        phyfps_sequence_free(seq);
    }
}

#[test]
fn error_codes() {
    let mut seq = ptr::null_mut();
    let missing = CString::new("/nonexistent/clip.fseq").unwrap();
    assert_eq!(unsafe { phyfps_sequence_load(missing.as_ptr(), &mut seq) }, PhyfpsStatus::Io);
    assert!(seq.is_null());
    assert_eq!(unsafe { phyfps_sequence_load(ptr::null(), &mut seq) }, PhyfpsStatus::NullPointer);
    assert_eq!(
        unsafe { phyfps_sequence_render(99, 1.0, 4.0, 8, 8, 1.0, 24.0, &mut seq) },
        PhyfpsStatus::InvalidArgument
    );
    let src = render(PhyfpsPattern::Blob, 10.0, 48, 240.0);
    assert_eq!(
        unsafe { phyfps_resample(src, 7, 240.0, 24.0, 1, &mut seq) },
        PhyfpsStatus::InvalidArgument
    );
    // f_low above f_high
    assert_eq!(
        unsafe { phyfps_resample(src, PhyfpsStrategy::Blur as u32, 240.0, 480.0, 1, &mut seq) },
        PhyfpsStatus::InvalidArgument
    );
    let bad_json = CString::new("{\"version\": 1}").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { phyfps_model_from_json(bad_json.as_ptr(), &mut model) }, PhyfpsStatus::Format);
    // a successful call clears the message
    assert_eq!(phyfps_window_count(10, 32, 4), 0);
    let _ = info(src);
    assert!(phyfps_last_error().is_null());
    unsafe { phyfps_sequence_free(src) };
    unsafe { phyfps_sequence_free(ptr::null_mut()) };
}

#[test]
fn metrics_and_loss() {
    let (mut mae, mut mape) = (0.0, 0.0);
    let p = [12.0, 36.0];
    let y = [10.0, 40.0];
    assert_eq!(unsafe { phyfps_mae_mape(p.as_ptr(), y.as_ptr(), 2, &mut mae, &mut mape) }, PhyfpsStatus::Ok);
    assert!((mae - 3.0).abs() < 1e-12 && (mape - 15.0).abs() < 1e-12);

    let s = [0.0];
    let e2 = [std::f64::consts::E.powi(2)];
    let mut loss = 0.0;
    assert_eq!(unsafe { phyfps_loss_log_mse(s.as_ptr(), e2.as_ptr(), 1, &mut loss) }, PhyfpsStatus::Ok);
    assert!((loss - 4.0).abs() < 1e-12);
    assert_eq!(
        unsafe { phyfps_mae_mape(p.as_ptr(), ptr::null(), 2, &mut mae, &mut mape) },
        PhyfpsStatus::NullPointer
    );
}

#[test]
fn from_samples_and_retime_identity() {
    let (w, h, t) = (4usize, 3usize, 30usize);
    let samples: Vec<f64> = (0..w * h * t).map(|i| (i % 251) as f64 / 250.0).collect();
    let mut seq = ptr::null_mut();
    let st = unsafe { phyfps_sequence_from_samples(w, h, t, samples.as_ptr(), 30.0, f64::NAN, &mut seq) };
    assert_eq!(st, PhyfpsStatus::Ok);
    assert!(info(seq).phy_fps_label.is_nan());

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { phyfps_retime_global(seq, 30.0, 30.0, &mut out) }, PhyfpsStatus::Ok);
    assert_eq!(info(out).frame_count, t);
    let mut a = vec![0.0; w * h];
    let mut b = vec![0.0; w * h];
    for k in 0..t {
        unsafe {
            phyfps_sequence_frame(seq, k, a.as_mut_ptr(), a.len());
            phyfps_sequence_frame(out, k, b.as_mut_ptr(), b.len());
        }
        assert_eq!(a, b);
    }
    let mut small = [0.0; 2];
    assert_eq!(
        unsafe { phyfps_sequence_frame(seq, 0, small.as_mut_ptr(), 2) },
        PhyfpsStatus::BufferTooSmall
    );
    let bad = [2.0];
    assert_eq!(
        unsafe { phyfps_sequence_from_samples(1, 1, 1, bad.as_ptr(), 30.0, f64::NAN, &mut out) },
        PhyfpsStatus::InvalidArgument
    );
    unsafe {
        phyfps_sequence_free(seq);
    }
}
