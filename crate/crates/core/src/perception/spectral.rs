//! Short-time Fourier transform and mel filterbank.

use super::PerceptionError;
use crate::acoustics::Waveform;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const FRAME: usize = 512;
pub const HOP: usize = 160;
pub const MEL_BANDS: usize = 64;
/// Floor applied before taking the log of mel energies.
pub const LOG_FLOOR: f64 = 1e-10;

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// One-sided magnitude STFT, frames along the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Vec<Vec<f64>>,
    pub frame: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn bins(&self) -> usize {
        self.frame / 2 + 1
    }

    pub fn frames(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.frame as f64
    }

    /// Energy of frame `t` recovered from its one-sided spectrum; equals the
    /// sum of squared windowed samples.
    pub fn frame_power(&self, t: usize) -> f64 {
        let m = &self.magnitudes[t];
        let last = m.len() - 1;
        let interior: f64 = m[1..last].iter().map(|v| v * v).sum();
        (m[0] * m[0] + m[last] * m[last] + 2.0 * interior) / self.frame as f64
    }

    /// Per-bin squared magnitude averaged over frames.
    pub fn mean_power(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.bins()];
        for frame in &self.magnitudes {
            for (a, m) in acc.iter_mut().zip(frame) {
                *a += m * m;
            }
        }
        let n = self.frames().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// Hann-windowed STFT with the given frame and hop sizes.
pub fn stft(w: &Waveform, frame: usize, hop: usize) -> Result<Spectrogram, PerceptionError> {
    if !frame.is_power_of_two() || hop == 0 || hop > frame {
        return Err(PerceptionError::BadFrame(frame));
    }
    if w.len() < frame {
        return Err(PerceptionError::TooShort { len: w.len(), frame });
    }
    let window = hann(frame);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(frame);
    let count = 1 + (w.len() - frame) / hop;
    let mut buf = vec![Complex::new(0.0, 0.0); frame];
    let mut magnitudes = Vec::with_capacity(count);
    for f in 0..count {
        let seg = &w.samples[f * hop..f * hop + frame];
        for ((b, s), h) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new(s * h, 0.0);
        }
        fft.process(&mut buf);
        magnitudes.push(buf[..=frame / 2].iter().map(|c| c.norm()).collect());
    }
    Ok(Spectrogram {
        magnitudes,
        frame,
        hop,
        sample_rate: w.sample_rate,
    })
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with centers evenly spaced in mel from 0 Hz to Nyquist.
/// The first and last triangles are halves, so the peak-one filters sum to one
/// at every frequency. `normalized` holds the same filters scaled so each row
/// sums to one over the FFT bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelFilterbank {
    pub bands: usize,
    pub frame: usize,
    pub sample_rate: u32,
    pub centers_hz: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(bands: usize, frame: usize, sample_rate: u32) -> Result<Self, PerceptionError> {
        if bands < 2 {
            return Err(PerceptionError::BadBands(bands));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let centers_hz: Vec<f64> = (0..bands)
            .map(|i| mel_to_hz(top * i as f64 / (bands - 1) as f64))
            .collect();
        let bins = frame / 2 + 1;
        let mut weights = vec![vec![0.0; bins]; bands];
        for k in 0..bins {
            let f = k as f64 * sample_rate as f64 / frame as f64;
            for b in 0..bands {
                let c = centers_hz[b];
                let w = if f <= c {
                    if b == 0 {
                        (f == c) as u8 as f64
                    } else {
                        let lo = centers_hz[b - 1];
                        if f > lo { (f - lo) / (c - lo) } else { 0.0 }
                    }
                } else if b + 1 < bands {
                    let hi = centers_hz[b + 1];
                    if f < hi { (hi - f) / (hi - c) } else { 0.0 }
                } else {
                    0.0
                };
                weights[b][k] = w;
            }
        }
        let normalized = weights
            .iter()
            .map(|row| {
                let s: f64 = row.iter().sum();
                row.iter().map(|w| if s > 0.0 { w / s } else { 0.0 }).collect()
            })
            .collect();
        Ok(Self {
            bands,
            frame,
            sample_rate,
            centers_hz,
            weights,
            normalized,
        })
    }

    /// Band energies of one power spectrum under the row-normalized filters.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.normalized
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    /// Linear band energies, frames x bands.
    pub energies: Vec<Vec<f64>>,
    pub bands: usize,
}

impl MelSpectrogram {
    /// Natural-log energies with the floor applied.
    pub fn log_energies(&self) -> Vec<Vec<f64>> {
        self.energies
            .iter()
            .map(|row| row.iter().map(|e| e.max(LOG_FLOOR).ln()).collect())
            .collect()
    }

    /// Energies averaged over frames.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.bands];
        for row in &self.energies {
            for (a, e) in acc.iter_mut().zip(row) {
                *a += e;
            }
        }
        let n = self.energies.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

pub fn mel_spectrogram(s: &Spectrogram, bands: usize) -> Result<MelSpectrogram, PerceptionError> {
    let fb = MelFilterbank::new(bands, s.frame, s.sample_rate)?;
    Ok(mel_with(&fb, s))
}

pub(crate) fn mel_with(fb: &MelFilterbank, s: &Spectrogram) -> MelSpectrogram {
    let mut power = vec![0.0; s.bins()];
    let energies = s
        .magnitudes
        .iter()
        .map(|frame| {
            for (p, m) in power.iter_mut().zip(frame) {
                *p = m * m;
            }
            fb.apply(&power)
        })
        .collect();
    MelSpectrogram {
        energies,
        bands: fb.bands,
    }
}
