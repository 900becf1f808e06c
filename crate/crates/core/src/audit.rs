//! Benchmark metrics over clip-level PhyFPS predictions.
//!
//! Averages are two-stage throughout: clips within a video first, then an
//! unweighted mean over videos. Standard deviations use the population
//! convention (divisor n).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STD_CONVENTION: &str = "population";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("no {0} to aggregate")]
    Empty(&'static str),
    #[error("clips from several videos ({0:?}, {1:?}) passed as one video")]
    MixedVideos(String, String),
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("length mismatch: {0} predictions vs {1} truths")]
    LengthMismatch(usize, usize),
    #[error("no meta fps for video {0:?}")]
    MissingMetaFps(String),
    #[error("every clip of every video was motion-gated")]
    NoPredictions,
    #[error("report parse: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipPrediction {
    pub video_id: String,
    pub clip_index: usize,
    pub f_hat: f64,
    pub meta_fps: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
fn std_pop(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn cv(xs: &[f64]) -> Result<f64, AuditError> {
    if xs.is_empty() {
        return Err(AuditError::Empty("values"));
    }
    let m = mean(xs);
    if m <= 0.0 {
        return Err(AuditError::NonPositive {
            what: "mean",
            value: m,
        });
    }
    Ok(std_pop(xs) / m)
}

fn check_clips(clips: &[ClipPrediction]) -> Result<(), AuditError> {
    let first = clips.first().ok_or(AuditError::Empty("clips"))?;
    for c in clips {
        if c.video_id != first.video_id {
            return Err(AuditError::MixedVideos(first.video_id.clone(), c.video_id.clone()));
        }
        if !(c.f_hat > 0.0) {
            return Err(AuditError::NonPositive {
                what: "f_hat",
                value: c.f_hat,
            });
        }
        if !(c.meta_fps > 0.0) {
            return Err(AuditError::NonPositive {
                what: "meta_fps",
                value: c.meta_fps,
            });
        }
    }
    Ok(())
}

/// Video-level PhyFPS: mean of its clip predictions.
pub fn video_mean(clips: &[ClipPrediction]) -> Result<f64, AuditError> {
    check_clips(clips)?;
    Ok(clips.iter().map(|c| c.f_hat).sum::<f64>() / clips.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoAudit {
    pub video_id: String,
    pub clip_count: usize,
    pub gated_clip_count: usize,
    pub mean_f: f64,
    pub intra_cv: f64,
    pub meta_fps: f64,
    pub avg_error: f64,
    pub pct_error: f64,
}

impl VideoAudit {
    pub fn from_clips(clips: &[ClipPrediction], gated: usize) -> Result<Self, AuditError> {
        let mean_f = video_mean(clips)?;
        let preds: Vec<f64> = clips.iter().map(|c| c.f_hat).collect();
        let metas: Vec<f64> = clips.iter().map(|c| c.meta_fps).collect();
        if metas.iter().any(|&m| m != metas[0]) {
            log::warn!("video {:?}: meta fps varies across clips", clips[0].video_id);
        }
        let (avg_error, pct_error) = clip_errors(clips);
        Ok(VideoAudit {
            video_id: clips[0].video_id.clone(),
            clip_count: clips.len(),
            gated_clip_count: gated,
            mean_f,
            intra_cv: cv(&preds)?,
            meta_fps: mean(&metas),
            avg_error,
            pct_error,
        })
    }
}

/// Per-video inner means of `|f - meta|` and `100 |f - meta| / meta`.
fn clip_errors(clips: &[ClipPrediction]) -> (f64, f64) {
    let n = clips.len() as f64;
    let abs: f64 = clips.iter().map(|c| (c.f_hat - c.meta_fps).abs()).sum();
    let rel: f64 = clips
        .iter()
        .map(|c| (c.f_hat - c.meta_fps).abs() / c.meta_fps)
        .sum();
    (abs / n, 100.0 * rel / n)
}

/// Model-level PhyFPS: unweighted mean of video means (not clip-weighted).
pub fn model_mean(videos: &[VideoAudit]) -> Result<f64, AuditError> {
    if videos.is_empty() {
        return Err(AuditError::Empty("videos"));
    }
    Ok(videos.iter().map(|v| v.mean_f).sum::<f64>() / videos.len() as f64)
}

/// Meta-vs-PhyFPS alignment: `(avg error in FPS, pct error in percent)`.
pub fn alignment_errors(groups: &[Vec<ClipPrediction>]) -> Result<(f64, f64), AuditError> {
    if groups.is_empty() {
        return Err(AuditError::Empty("videos"));
    }
    let mut avg = 0.0;
    let mut pct = 0.0;
    for g in groups {
        check_clips(g)?;
        let (a, p) = clip_errors(g);
        avg += a;
        pct += p;
    }
    let v = groups.len() as f64;
    Ok((avg / v, pct / v))
}

/// `(intra CV, inter CV)` from per-video prediction lists.
///
/// Intra is the mean over videos of std/mean of clip predictions; inter is
/// std/mean of the video means. A single video has inter CV 0.
pub fn consistency_cv(videos: &[Vec<f64>]) -> Result<(f64, f64), AuditError> {
    if videos.is_empty() {
        return Err(AuditError::Empty("videos"));
    }
    let mut intra = 0.0;
    let mut means = Vec::with_capacity(videos.len());
    for v in videos {
        if v.is_empty() {
            return Err(AuditError::Empty("clip predictions"));
        }
        if let Some(&bad) = v.iter().find(|&&f| !(f > 0.0)) {
            return Err(AuditError::NonPositive {
                what: "f_hat",
                value: bad,
            });
        }
        intra += cv(v)?;
        means.push(mean(v));
    }
    Ok((intra / videos.len() as f64, cv(&means)?))
}

/// `(MAE in FPS, MAPE in percent)` against ground-truth rates.
pub fn mae_mape(predictions: &[f64], truths: &[f64]) -> Result<(f64, f64), AuditError> {
    if predictions.len() != truths.len() {
        return Err(AuditError::LengthMismatch(predictions.len(), truths.len()));
    }
    if truths.is_empty() {
        return Err(AuditError::Empty("predictions"));
    }
    let mut abs = 0.0;
    let mut rel = 0.0;
    for (&p, &y) in predictions.iter().zip(truths) {
        if !(y > 0.0) {
            return Err(AuditError::NonPositive {
                what: "truth",
                value: y,
            });
        }
        abs += (y - p).abs();
        rel += (y - p).abs() / y;
    }
    let n = truths.len() as f64;
    Ok((abs / n, 100.0 * rel / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAudit {
    pub model_id: String,
    pub video_count: usize,
    pub meta_fps: f64,
    pub phy_fps: f64,
    pub avg_error: f64,
    pub pct_error: f64,
    pub intra_cv: f64,
    pub inter_cv: f64,
}

/// Machine-readable audit of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditReport {
    pub model_id: String,
    pub meta_fps: f64,
    pub phy_fps: f64,
    pub avg_error: f64,
    pub pct_error: f64,
    pub intra_cv: f64,
    pub inter_cv: f64,
    pub video_count: usize,
    pub clip_count: usize,
    pub gated_clip_count: usize,
    pub std_convention: String,
    pub per_video: Vec<VideoAudit>,
}

/// Table column order for the CSV view.
pub const CSV_HEADER: [&str; 7] = [
    "Model",
    "Meta FPS",
    "PhyFPS",
    "Avg. Error",
    "Pct. Error(%)",
    "Intra CV",
    "Inter CV",
];

impl AuditReport {
    pub fn summary(&self) -> ModelAudit {
        ModelAudit {
            model_id: self.model_id.clone(),
            video_count: self.video_count,
            meta_fps: self.meta_fps,
            phy_fps: self.phy_fps,
            avg_error: self.avg_error,
            pct_error: self.pct_error,
            intra_cv: self.intra_cv,
            inter_cv: self.inter_cv,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, AuditError> {
        serde_json::from_str(s).map_err(|e| AuditError::Parse(e.to_string()))
    }

    /// Header plus one row, numbers rounded to two decimals.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        out.push_str(&format!(
            "{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2}\n",
            csv_field(&self.model_id),
            self.meta_fps,
            self.phy_fps,
            self.avg_error,
            self.pct_error,
            self.intra_cv,
            self.inter_cv
        ));
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Builds the report from per-video clip predictions (`None` = motion-gated).
///
/// Videos keep the order given in `per_video`. Videos whose clips were all
/// gated are dropped from the aggregates and counted in `gated_clip_count`.
pub fn build_report(
    model_id: &str,
    per_video: &[(String, Vec<Option<f64>>)],
    meta_fps: &BTreeMap<String, f64>,
) -> Result<AuditReport, AuditError> {
    if per_video.is_empty() {
        return Err(AuditError::Empty("videos"));
    }
    let mut videos = Vec::new();
    let mut gated_total = 0;
    let mut clip_total = 0;
    for (vid, preds) in per_video {
        let meta = *meta_fps
            .get(vid)
            .ok_or_else(|| AuditError::MissingMetaFps(vid.clone()))?;
        let clips: Vec<ClipPrediction> = preds
            .iter()
            .enumerate()
            .filter_map(|(i, p)| {
                p.map(|f| ClipPrediction {
                    video_id: vid.clone(),
                    clip_index: i,
                    f_hat: f,
                    meta_fps: meta,
                })
            })
            .collect();
        let gated = preds.len() - clips.len();
        gated_total += gated;
        clip_total += clips.len();
        if clips.is_empty() {
            continue;
        }
        videos.push(VideoAudit::from_clips(&clips, gated)?);
    }
    if videos.is_empty() {
        return Err(AuditError::NoPredictions);
    }
    let v = videos.len() as f64;
    let means: Vec<f64> = videos.iter().map(|x| x.mean_f).collect();
    Ok(AuditReport {
        model_id: model_id.to_string(),
        meta_fps: videos.iter().map(|x| x.meta_fps).sum::<f64>() / v,
        phy_fps: model_mean(&videos)?,
        avg_error: videos.iter().map(|x| x.avg_error).sum::<f64>() / v,
        pct_error: videos.iter().map(|x| x.pct_error).sum::<f64>() / v,
        intra_cv: videos.iter().map(|x| x.intra_cv).sum::<f64>() / v,
        inter_cv: cv(&means)?,
        video_count: videos.len(),
        clip_count: clip_total,
        gated_clip_count: gated_total,
        std_convention: STD_CONVENTION.to_string(),
        per_video: videos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clips(vid: &str, fs: &[f64], meta: f64) -> Vec<ClipPrediction> {
        fs.iter()
            .enumerate()
            .map(|(i, &f)| ClipPrediction {
                video_id: vid.into(),
                clip_index: i,
                f_hat: f,
                meta_fps: meta,
            })
            .collect()
    }

    #[test]
    fn video_means() {
        assert_eq!(video_mean(&clips("a", &[24.0], 24.0)).unwrap(), 24.0);
        assert_eq!(video_mean(&clips("a", &[20.0, 28.0], 24.0)).unwrap(), 24.0);
        assert_eq!(video_mean(&clips("a", &[10.0, 20.0, 30.0], 24.0)).unwrap(), 20.0);
        assert_eq!(video_mean(&[]), Err(AuditError::Empty("clips")));
        let mut mixed = clips("a", &[1.0], 24.0);
        mixed.extend(clips("b", &[1.0], 24.0));
        assert!(matches!(video_mean(&mixed), Err(AuditError::MixedVideos(..))));
    }

    #[test]
    fn model_mean_is_two_stage() {
        let a = VideoAudit::from_clips(&clips("a", &[20.0], 24.0), 0).unwrap();
        let b = VideoAudit::from_clips(&clips("b", &[40.0; 99], 24.0), 0).unwrap();
        assert_eq!(model_mean(&[a, b]).unwrap(), 30.0);
        assert_eq!(model_mean(&[]), Err(AuditError::Empty("videos")));
    }

    #[test]
    fn alignment_hand_cases() {
        assert_eq!(
            alignment_errors(&[clips("a", &[24.0, 24.0], 24.0)]).unwrap(),
            (0.0, 0.0)
        );
        assert_eq!(
            alignment_errors(&[clips("a", &[30.0, 18.0], 24.0)]).unwrap(),
            (6.0, 25.0)
        );
        assert_eq!(
            alignment_errors(&[clips("a", &[48.0], 24.0), clips("b", &[24.0], 24.0)]).unwrap(),
            (12.0, 50.0)
        );
        assert!(matches!(
            alignment_errors(&[clips("a", &[48.0], 0.0)]),
            Err(AuditError::NonPositive { what: "meta_fps", .. })
        ));
    }

    #[test]
    fn cv_hand_cases() {
        assert_eq!(consistency_cv(&[vec![24.0; 3], vec![24.0; 2]]).unwrap(), (0.0, 0.0));
        let (intra, _) = consistency_cv(&[vec![8.0, 12.0]]).unwrap();
        assert!((intra - 0.2).abs() < 1e-15);
        let (_, inter) = consistency_cv(&[vec![20.0], vec![30.0]]).unwrap();
        assert!((inter - 0.2).abs() < 1e-15);
    }

    #[test]
    fn mae_mape_hand_cases() {
        assert_eq!(mae_mape(&[24.0], &[24.0]).unwrap(), (0.0, 0.0));
        assert_eq!(mae_mape(&[30.0], &[24.0]).unwrap(), (6.0, 25.0));
        let (mae, mape) = mae_mape(&[12.0, 36.0], &[10.0, 40.0]).unwrap();
        assert!((mae - 3.0).abs() < 1e-12 && (mape - 15.0).abs() < 1e-12);
        assert_eq!(mae_mape(&[1.0], &[1.0, 2.0]), Err(AuditError::LengthMismatch(1, 2)));
        assert!(mae_mape(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn report_perfect_alignment_and_csv() {
        let per_video = vec![
            ("v1".to_string(), vec![Some(24.0); 5]),
            ("v2".to_string(), vec![Some(24.0), None, Some(24.0)]),
        ];
        let meta: BTreeMap<_, _> = [("v1".to_string(), 24.0), ("v2".to_string(), 24.0)].into();
        let r = build_report("m", &per_video, &meta).unwrap();
        assert_eq!(
            (r.phy_fps, r.avg_error, r.pct_error, r.intra_cv, r.inter_cv),
            (24.0, 0.0, 0.0, 0.0, 0.0)
        );
        assert_eq!(r.gated_clip_count, 1);
        assert_eq!(r.clip_count, 7);
        assert_eq!(r.std_convention, "population");
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "Model,Meta FPS,PhyFPS,Avg. Error,Pct. Error(%),Intra CV,Inter CV"
        );
        assert_eq!(lines.next().unwrap(), "m,24.00,24.00,0.00,0.00,0.00,0.00");
        assert_eq!(AuditReport::from_json(&r.to_json()).unwrap(), r);

        let missing: BTreeMap<String, f64> = BTreeMap::new();
        assert!(matches!(
            build_report("m", &per_video, &missing),
            Err(AuditError::MissingMetaFps(_))
        ));
    }
}
