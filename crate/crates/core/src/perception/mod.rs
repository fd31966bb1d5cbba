//! Observation features: spectrograms, mel energies, binaural direction cues,
//! a nearest-centroid sound classifier, and grid range scans.

mod classifier;
mod direction;
mod observe;
mod scan;
mod spectral;

pub use classifier::{Classification, CategoryClassifier};
pub use direction::{direction_features, spectral_flatness, AudioFeatures, BAND_EDGES_HZ};
pub use observe::{Listener, Observation};
pub use scan::{range_scan, RangeScan, ScanConfig};
pub use spectral::{mel_spectrogram, stft, MelFilterbank, MelSpectrogram, Spectrogram, FRAME, HOP, MEL_BANDS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("signal of {len} samples is shorter than one {frame}-sample frame")]
    TooShort { len: usize, frame: usize },
    #[error("frame size {0} must be a power of two and hop must be in 1..=frame")]
    BadFrame(usize),
    #[error("need at least two mel bands, got {0}")]
    BadBands(usize),
    #[error("classifier has not been fitted")]
    Unfitted,
    #[error(transparent)]
    Acoustics(#[from] crate::acoustics::AcousticsError),
    #[error(transparent)]
    Soundbank(#[from] crate::soundbank::SoundbankError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
