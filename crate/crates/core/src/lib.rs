//! Physical frame-rate (PhyFPS) estimation toolkit.
//!
//! - [`frame`], [`fseq`], [`scene`]: frame data model, storage, analytic test scenes
//! - [`resample`]: high-rate upsampling and camera-mechanics downsampling
//! - [`chronometer`]: motion tokens, query-pooling regressor, training, inference
//! - [`audit`]: clip/video/model-level metrics and reports
//! - [`retime`]: PhyFPS-guided retiming
//! - [`preference`]: Bradley–Terry analysis of pairwise preferences

pub mod audit;
pub mod chronometer;
pub mod cli;
pub mod config;
pub mod frame;
pub mod fseq;
pub mod preference;
pub mod resample;
pub mod retime;
pub mod scene;
pub mod selftest;

pub use frame::{Frame, FrameSequence};
pub use resample::{ResampleSpec, Strategy};

use thiserror::Error;

/// Any error the toolkit can produce.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Frame(#[from] frame::FrameError),
    #[error(transparent)]
    Format(#[from] fseq::FormatError),
    #[error(transparent)]
    Scene(#[from] scene::SceneError),
    #[error(transparent)]
    Resample(#[from] resample::ResampleError),
    #[error(transparent)]
    Chrono(#[from] chronometer::ChronoError),
    #[error(transparent)]
    Audit(#[from] audit::AuditError),
    #[error(transparent)]
    Retime(#[from] retime::RetimeError),
    #[error(transparent)]
    Preference(#[from] preference::PreferenceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Data(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
