//! Room acoustics: impulse responses, convolution, multi-source binaural rendering.

mod binaural;
mod cache;
mod convolve;
mod rir;
mod wav;

pub use binaural::{render_binaural, render_binaural_raw, ActiveSource, BinauralFrame, EarGeometry};
pub use cache::{RirCache, RirKey};
pub use convolve::convolve;
pub use rir::{compute_rir, trace_paths, PathTap, RirConfig};
pub use wav::{read_wav_mono, write_wav_mono, write_wav_stereo};

use crate::world::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SAMPLE_RATE: u32 = 16_000;
pub const SPEED_OF_SOUND: f64 = 343.0;
/// Distance floor for 1/d attenuation, meters.
pub const MIN_DISTANCE: f64 = 0.1;
/// Center frequencies of the material absorption bands, Hz.
pub const BAND_CENTERS_HZ: [f64; 4] = [125.0, 500.0, 2000.0, 8000.0];

#[derive(Debug, Error)]
pub enum AcousticsError {
    #[error("point {0:?} lies outside the scene")]
    OutOfBounds(Vec2),
    #[error("unknown material `{0}`")]
    UnknownMaterial(String),
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("impulse response has zero energy")]
    SilentRir,
    #[error("malformed impulse response data: {0}")]
    Format(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono sample buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Default for Waveform {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl Waveform {
    pub fn new(samples: Vec<f64>) -> Self {
        Self {
            samples,
            sample_rate: SAMPLE_RATE,
        }
    }

    pub fn silence(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Elementwise sum; the result is as long as the longer input.
    pub fn mix(&self, other: &Waveform) -> Waveform {
        let n = self.len().max(other.len());
        let mut out = vec![0.0; n];
        for (i, s) in self.samples.iter().enumerate() {
            out[i] += s;
        }
        for (i, s) in other.samples.iter().enumerate() {
            out[i] += s;
        }
        Waveform {
            samples: out,
            sample_rate: self.sample_rate,
        }
    }

    pub fn scaled(&self, gain: f64) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Transfer function from a source position to one ear.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub taps: Vec<f64>,
    pub sample_rate: u32,
    pub source: Vec2,
    pub ear: Vec2,
}

impl ImpulseResponse {
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    pub fn first_nonzero(&self) -> Option<usize> {
        self.taps.iter().position(|t| *t != 0.0)
    }

    /// `(index, amplitude)` of every nonzero tap.
    pub fn nonzero_taps(&self) -> Vec<(usize, f64)> {
        self.taps
            .iter()
            .enumerate()
            .filter(|(_, t)| **t != 0.0)
            .map(|(i, t)| (i, *t))
            .collect()
    }

    /// Reverberation time from Schroeder backward integration: time from the
    /// first arrival until the energy remaining after a tap falls 60 dB below the
    /// total. Returns the response length when the decay never gets there.
    pub fn rt60(&self) -> Result<f64, AcousticsError> {
        let total = self.energy();
        if !(total > 0.0) {
            return Err(AcousticsError::SilentRir);
        }
        let onset = self.first_nonzero().unwrap_or(0);
        let threshold = total * 1e-6;
        let mut remaining = total;
        for (i, t) in self.taps.iter().enumerate().skip(onset) {
            remaining -= t * t;
            if remaining <= threshold {
                return Ok((i - onset) as f64 / self.sample_rate as f64);
            }
        }
        Ok(self.taps.len() as f64 / self.sample_rate as f64)
    }

    /// Little-endian binary: `b"ERIR"`, u32 sample rate, 4 x f64 (source x/y,
    /// ear x/y), u32 tap count, then the taps as f32.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + 4 * self.taps.len());
        out.extend_from_slice(b"ERIR");
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        for v in [self.source.x, self.source.y, self.ear.x, self.ear.y] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.taps.len() as u32).to_le_bytes());
        for t in &self.taps {
            out.extend_from_slice(&(*t as f32).to_le_bytes());
        }
        out
    }

    /// Parses [`ImpulseResponse::to_bytes`] output; returns the bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize), AcousticsError> {
        let bad = |m: &str| AcousticsError::Format(m.to_string());
        if bytes.len() < 44 || &bytes[..4] != b"ERIR" {
            return Err(bad("missing ERIR header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let sample_rate = u32_at(4);
        let source = Vec2::new(f64_at(8), f64_at(16));
        let ear = Vec2::new(f64_at(24), f64_at(32));
        let n = u32_at(40) as usize;
        let end = 44 + 4 * n;
        if bytes.len() < end {
            return Err(bad("truncated taps"));
        }
        let taps = bytes[44..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok((
            Self {
                taps,
                sample_rate,
                source,
                ear,
            },
            end,
        ))
    }
}

/// Free-function form of [`ImpulseResponse::rt60`].
pub fn rt60_estimate(rir: &ImpulseResponse) -> Result<f64, AcousticsError> {
    rir.rt60()
}

/// Index of the material band whose center is nearest (in octaves) to `hz`.
pub fn band_for_frequency(hz: f64) -> usize {
    BAND_CENTERS_HZ
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (hz.max(1.0) / a.1).log2().abs();
            let db = (hz.max(1.0) / b.1).log2().abs();
            da.total_cmp(&db)
        })
        .map(|(i, _)| i)
        .unwrap()
}
