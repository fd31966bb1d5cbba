//! Procedurally synthesized sound library: one parametric family per sounding
//! category, with per-instance random parameters and a fixed train/test split.

use crate::acoustics::{band_for_frequency, write_wav_mono, AcousticsError, Waveform, SAMPLE_RATE};
use crate::world::Category;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;
use thiserror::Error;

/// Default clip length, seconds.
pub const CLIP_SECONDS: f64 = 4.0;
/// Every clip is scaled so its largest absolute sample equals this.
pub const PEAK_AMPLITUDE: f64 = 0.9;
/// Default observation window, seconds.
pub const STEP_SECONDS: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SoundbankError {
    #[error("unknown clip `{0}`")]
    UnknownClip(String),
    #[error("category {0} has no sound clips")]
    Silent(Category),
    #[error(transparent)]
    Acoustics(#[from] AcousticsError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

/// Clip counts per category as `(train, test)`.
pub fn split_counts(category: Category) -> Option<(usize, usize)> {
    match category {
        Category::Alarm => Some((11, 5)),
        Category::Furby => Some((30, 14)),
        Category::Phone => Some((19, 9)),
        Category::Sink => Some((6, 3)),
        Category::Doorbell => Some((11, 5)),
        Category::Distractor => None,
    }
}

/// Synthesis recipe of one clip. Re-running [`ClipParams::synthesize`] on the
/// same parameters reproduces the clip exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClipParams {
    /// Band-limited square-wave beeps gated on and off.
    Alarm { freq: f64, on: f64, off: f64 },
    /// Two summed tones played in ring bursts.
    Phone { f1: f64, f2: f64, on: f64, off: f64 },
    /// Frequency-modulated warble.
    Furby { carrier: f64, mod_rate: f64, deviation: f64, tremolo: f64 },
    /// Band-passed noise with slow amplitude flutter.
    Sink { noise_seed: u64, highpass: f64, lowpass: f64, flutter_rate: f64, flutter_depth: f64 },
    /// Repeating two-note decaying chime.
    Doorbell { f1: f64, f2: f64, decay: f64, gap: f64, period: f64 },
}

impl ClipParams {
    fn sample(category: Category, rng: &mut ChaCha8Rng) -> Self {
        match category {
            Category::Alarm => ClipParams::Alarm {
                freq: rng.gen_range(1800.0..2200.0),
                on: rng.gen_range(0.06..0.2),
                off: rng.gen_range(0.05..0.2),
            },
            Category::Phone => ClipParams::Phone {
                f1: 440.0 * rng.gen_range(0.97..1.03),
                f2: 480.0 * rng.gen_range(0.97..1.03),
                on: rng.gen_range(0.4..1.0),
                off: rng.gen_range(0.2..0.4),
            },
            Category::Furby => ClipParams::Furby {
                carrier: rng.gen_range(3000.0..4000.0),
                mod_rate: rng.gen_range(4.0..12.0),
                deviation: rng.gen_range(200.0..500.0),
                tremolo: rng.gen_range(0.0..0.5),
            },
            Category::Sink => ClipParams::Sink {
                noise_seed: rng.gen(),
                highpass: rng.gen_range(150.0..300.0),
                lowpass: rng.gen_range(4000.0..6000.0),
                flutter_rate: rng.gen_range(3.0..8.0),
                flutter_depth: rng.gen_range(0.1..0.3),
            },
            Category::Doorbell => {
                let f1 = rng.gen_range(900.0..1200.0);
                ClipParams::Doorbell {
                    f1,
                    f2: f1 * rng.gen_range(0.75..0.84),
                    decay: rng.gen_range(3.0..6.0),
                    gap: rng.gen_range(0.3..0.5),
                    period: rng.gen_range(1.0..1.33),
                }
            }
            Category::Distractor => unreachable!("distractors are silent"),
        }
    }

    pub fn category(&self) -> Category {
        match self {
            ClipParams::Alarm { .. } => Category::Alarm,
            ClipParams::Phone { .. } => Category::Phone,
            ClipParams::Furby { .. } => Category::Furby,
            ClipParams::Sink { .. } => Category::Sink,
            ClipParams::Doorbell { .. } => Category::Doorbell,
        }
    }

    /// Frequency carrying most of the clip's energy, Hz.
    pub fn dominant_frequency(&self) -> f64 {
        match *self {
            ClipParams::Alarm { freq, .. } => freq,
            ClipParams::Phone { f1, f2, .. } => 0.5 * (f1 + f2),
            ClipParams::Furby { carrier, .. } => carrier,
            ClipParams::Sink { highpass, lowpass, .. } => (highpass * lowpass).sqrt(),
            ClipParams::Doorbell { f1, f2, .. } => 0.5 * (f1 + f2),
        }
    }

    /// Renders `seconds` of audio at the repo sample rate, peak-normalized.
    pub fn synthesize(&self, seconds: f64) -> Waveform {
        let fs = SAMPLE_RATE as f64;
        let n = (seconds * fs).round() as usize;
        let t = |i: usize| i as f64 / fs;
        let mut s: Vec<f64> = match *self {
            ClipParams::Alarm { freq, on, off } => (0..n)
                .map(|i| {
                    let ti = t(i);
                    if ti % (on + off) >= on {
                        return 0.0;
                    }
                    let mut v = 0.0;
                    let mut k = 1.0;
                    while k * freq < 0.47 * fs {
                        v += (TAU * k * freq * ti).sin() / k;
                        k += 2.0;
                    }
                    v
                })
                .collect(),
            ClipParams::Phone { f1, f2, on, off } => (0..n)
                .map(|i| {
                    let ti = t(i);
                    if ti % (on + off) >= on {
                        0.0
                    } else {
                        (TAU * f1 * ti).sin() + (TAU * f2 * ti).sin()
                    }
                })
                .collect(),
            ClipParams::Furby { carrier, mod_rate, deviation, tremolo } => (0..n)
                .map(|i| {
                    let ti = t(i);
                    let phase = TAU * carrier * ti - deviation / mod_rate * (TAU * mod_rate * ti).cos();
                    let amp = 1.0 - tremolo * 0.5 * (1.0 + (TAU * 0.5 * mod_rate * ti).sin());
                    amp * phase.sin()
                })
                .collect(),
            ClipParams::Sink { noise_seed, highpass, lowpass, flutter_rate, flutter_depth } => {
                let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
                let a_hp = (-TAU * highpass / fs).exp();
                let a_lp = (-TAU * lowpass / fs).exp();
                let (mut lp, mut hp_state) = (0.0, 0.0);
                (0..n)
                    .map(|i| {
                        let x: f64 = rng.gen_range(-1.0..1.0);
                        lp = (1.0 - a_lp) * x + a_lp * lp;
                        hp_state = (1.0 - a_hp) * lp + a_hp * hp_state;
                        let flutter = 1.0 - flutter_depth * 0.5 * (1.0 + (TAU * flutter_rate * t(i)).sin());
                        (lp - hp_state) * flutter
                    })
                    .collect()
            }
            ClipParams::Doorbell { f1, f2, decay, gap, period } => (0..n)
                .map(|i| {
                    let tp = t(i) % period;
                    let mut v = (-decay * tp).exp() * (TAU * f1 * tp).sin();
                    if tp >= gap {
                        let td = tp - gap;
                        v += (-decay * td).exp() * (TAU * f2 * td).sin();
                    }
                    v
                })
                .collect(),
        };
        let peak = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            let g = PEAK_AMPLITUDE / peak;
            s.iter_mut().for_each(|v| *v *= g);
        }
        Waveform::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundClip {
    pub clip_id: String,
    pub category: Category,
    pub split: Split,
    pub params: ClipParams,
    /// Material band used when rendering this clip through a room.
    pub dominant_band: usize,
    pub looped: bool,
    #[serde(skip)]
    pub waveform: Waveform,
}

/// `step_seconds` of the looped clip starting at step `t_step`.
pub fn window_of(clip: &SoundClip, t_step: usize, step_seconds: f64) -> Waveform {
    let w = &clip.waveform;
    let len = (step_seconds * w.sample_rate as f64).round() as usize;
    let n = w.len();
    if n == 0 {
        return Waveform::silence(len);
    }
    let start = t_step * len;
    let samples = (start..start + len)
        .map(|i| if clip.looped || i < n { w.samples[i % n] } else { 0.0 })
        .collect();
    Waveform {
        samples,
        sample_rate: w.sample_rate,
    }
}

/// Bank manifest as persisted to disk: clip metadata plus synthesis parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub seed: u64,
    pub clip_seconds: f64,
    pub clips: Vec<SoundClip>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundBank {
    pub seed: u64,
    pub clips: Vec<SoundClip>,
}

/// Builds the full bank. Each clip draws its parameters from its own stream
/// seeded by `(seed, category, index)`, so the bank is stable under reordering.
pub fn synthesize_bank(seed: u64) -> SoundBank {
    use rayon::prelude::*;
    let mut specs = Vec::new();
    for cat in Category::SOUNDING {
        let (train, test) = split_counts(cat).unwrap();
        for i in 0..train + test {
            specs.push((cat, i, if i < train { Split::Train } else { Split::Test }));
        }
    }
    let clips = specs
        .into_par_iter()
        .map(|(cat, i, split)| {
            let stream = seed ^ ((cat.sounding_index().unwrap() as u64 + 1) << 40) ^ (i as u64).wrapping_mul(0x9E37_79B9);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let params = ClipParams::sample(cat, &mut rng);
            make_clip(format!("{}_{:02}", cat.as_str().to_ascii_lowercase(), i), split, params, CLIP_SECONDS)
        })
        .collect();
    SoundBank { seed, clips }
}

fn make_clip(clip_id: String, split: Split, params: ClipParams, seconds: f64) -> SoundClip {
    SoundClip {
        clip_id,
        category: params.category(),
        split,
        dominant_band: band_for_frequency(params.dominant_frequency()),
        looped: true,
        waveform: params.synthesize(seconds),
        params,
    }
}

impl SoundBank {
    pub fn get(&self, clip_id: &str) -> Result<&SoundClip, SoundbankError> {
        self.clips
            .iter()
            .find(|c| c.clip_id == clip_id)
            .ok_or_else(|| SoundbankError::UnknownClip(clip_id.to_string()))
    }

    pub fn clips_of(&self, category: Category, split: Split) -> impl Iterator<Item = &SoundClip> {
        self.clips
            .iter()
            .filter(move |c| c.category == category && c.split == split)
    }

    pub fn count(&self, category: Category, split: Split) -> usize {
        self.clips_of(category, split).count()
    }

    pub fn manifest(&self) -> BankManifest {
        BankManifest {
            seed: self.seed,
            clip_seconds: CLIP_SECONDS,
            clips: self.clips.clone(),
        }
    }

    /// Rebuilds the bank from a manifest by re-synthesizing every clip.
    pub fn from_manifest(m: BankManifest) -> Self {
        let clips = m
            .clips
            .into_iter()
            .map(|c| make_clip(c.clip_id, c.split, c.params, m.clip_seconds))
            .collect();
        SoundBank { seed: m.seed, clips }
    }

    pub fn save_manifest(&self, path: &Path) -> Result<(), SoundbankError> {
        std::fs::write(path, serde_json::to_string_pretty(&self.manifest())?)?;
        Ok(())
    }

    pub fn load_manifest(path: &Path) -> Result<Self, SoundbankError> {
        let m: BankManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(Self::from_manifest(m))
    }

    /// Writes every clip as `<dir>/<clip_id>.wav`.
    pub fn export_wavs(&self, dir: &Path) -> Result<(), SoundbankError> {
        std::fs::create_dir_all(dir)?;
        for c in &self.clips {
            write_wav_mono(&c.waveform, std::fs::File::create(dir.join(format!("{}.wav", c.clip_id)))?)?;
        }
        Ok(())
    }
}
