//! Binaural cues and coarse spectral descriptors of one observation frame.
//!
//! Sign convention: `itd_samples > 0` means the right channel lags the left,
//! which happens when the source is on the agent's left.

use super::spectral::{hann, FRAME};
use crate::acoustics::{BinauralFrame, EarGeometry};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Boundaries between the four material bands (geometric midpoints of the
/// band centers), Hz.
pub const BAND_EDGES_HZ: [f64; 3] = [250.0, 1000.0, 4000.0];

const ENERGY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioFeatures {
    /// `10 log10(E_left / E_right)`.
    pub ild_db: f64,
    pub itd_samples: i32,
    /// Share of spectral power in each material band; sums to 1 unless silent.
    pub band_energies: [f64; 4],
    pub spectral_centroid: f64,
    pub spectral_flatness: f64,
    /// Mean per-sample power of the downmix, dB.
    pub level_db: f64,
    /// Set when either channel is silent; delay and ILD are then 0.
    pub silent: bool,
}

/// Delay maximizing `sum L[n] R[n + tau]` over `|tau| <= limit`; ties go to
/// the smaller `|tau|`.
fn cross_correlation_lag(left: &[f64], right: &[f64], limit: i32) -> i32 {
    let n = left.len().min(right.len()) as i32;
    let mut best = (f64::NEG_INFINITY, 0i32);
    for k in 0..=limit {
        for tau in if k == 0 { vec![0] } else { vec![-k, k] } {
            let lo = 0.max(-tau);
            let hi = n.min(n - tau);
            let mut c = 0.0;
            for i in lo..hi {
                c += left[i as usize] * right[(i + tau) as usize];
            }
            if c > best.0 {
                best = (c, tau);
            }
        }
    }
    best.1
}

/// Power spectrum averaged over Hann frames (one zero-padded frame when the
/// signal is shorter than [`FRAME`]).
fn average_power(samples: &[f64]) -> Vec<f64> {
    let window = hann(FRAME);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(FRAME);
    let mut acc = vec![0.0; FRAME / 2 + 1];
    let starts: Vec<usize> = if samples.len() <= FRAME {
        vec![0]
    } else {
        (0..=samples.len() - FRAME).step_by(FRAME / 2).collect()
    };
    let mut buf = vec![Complex::new(0.0, 0.0); FRAME];
    for &s in &starts {
        for (i, b) in buf.iter_mut().enumerate() {
            let x = samples.get(s + i).copied().unwrap_or(0.0);
            *b = Complex::new(x * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
    }
    acc.iter_mut().for_each(|a| *a /= starts.len() as f64);
    acc
}

pub fn direction_features(frame: &BinauralFrame, ears: &EarGeometry) -> AudioFeatures {
    let (l, r) = (&frame.left.samples, &frame.right.samples);
    let el: f64 = l.iter().map(|v| v * v).sum();
    let er: f64 = r.iter().map(|v| v * v).sum();
    let silent = !(el > 0.0 && er > 0.0);
    let limit = ears.max_itd_samples() as i32 + 1;
    let (itd_samples, ild_db) = if silent {
        (0, 0.0)
    } else {
        (cross_correlation_lag(l, r, limit), 10.0 * (el / er).log10())
    };
    let mono = frame.downmix();
    let n = mono.len().max(1) as f64;
    let level_db = 10.0 * ((el + er) / (2.0 * n)).max(ENERGY_FLOOR).log10();

    let power = average_power(&mono.samples);
    let fs = frame.left.sample_rate as f64;
    let freq = |k: usize| k as f64 * fs / FRAME as f64;
    let total: f64 = power.iter().sum();
    let mut band_energies = [0.0; 4];
    let (mut spectral_centroid, mut spectral_flatness) = (0.0, 0.0);
    if total > ENERGY_FLOOR {
        for (k, p) in power.iter().enumerate() {
            let band = BAND_EDGES_HZ.iter().take_while(|e| freq(k) >= **e).count();
            band_energies[band] += p / total;
        }
        spectral_centroid = power.iter().enumerate().map(|(k, p)| freq(k) * p).sum::<f64>() / total;
        spectral_flatness = flatness_of(&power);
    }
    AudioFeatures {
        ild_db,
        itd_samples,
        band_energies,
        spectral_centroid,
        spectral_flatness,
        level_db,
        silent,
    }
}

/// Spectral flatness of a mono signal (geometric over arithmetic mean power).
pub fn spectral_flatness(samples: &[f64]) -> f64 {
    flatness_of(&average_power(samples))
}

fn flatness_of(power: &[f64]) -> f64 {
    let body = &power[1..];
    let mean = body.iter().sum::<f64>() / body.len() as f64;
    if mean <= ENERGY_FLOOR {
        return 0.0;
    }
    let log_mean = body.iter().map(|p| p.max(ENERGY_FLOOR).ln()).sum::<f64>() / body.len() as f64;
    (log_mean.exp() / mean).clamp(0.0, 1.0)
}
