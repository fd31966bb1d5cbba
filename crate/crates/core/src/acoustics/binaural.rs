//! Two-receiver rendering: each ear is a point receiver offset sideways from the
//! agent's base, so interaural delay and level emerge from path geometry.

use super::cache::RirCache;
use super::convolve::convolve_into;
use super::rir::{compute_rir, RirConfig};
use super::{AcousticsError, Waveform, SAMPLE_RATE};
use crate::world::{AgentState, ObjectInstance, Scene, Vec2};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarGeometry {
    /// Ear separation, meters.
    pub head_width: f64,
}

impl Default for EarGeometry {
    fn default() -> Self {
        Self { head_width: 0.18 }
    }
}

impl EarGeometry {
    pub fn left_offset(&self) -> f64 {
        self.head_width / 2.0
    }

    pub fn right_offset(&self) -> f64 {
        -self.head_width / 2.0
    }

    /// `(left, right)` ear positions for the agent's current pose.
    pub fn ear_positions(&self, base: Vec2, heading: f64) -> (Vec2, Vec2) {
        let left_dir = Vec2::from_angle(heading).perp();
        (
            base + left_dir * self.left_offset(),
            base + left_dir * self.right_offset(),
        )
    }

    /// Largest possible interaural delay in samples, rounded.
    pub fn max_itd_samples(&self) -> usize {
        (self.head_width / super::SPEED_OF_SOUND * SAMPLE_RATE as f64).round() as usize
    }
}

/// A sound-emitting object and the audio it plays during the current step.
#[derive(Debug, Clone)]
pub struct ActiveSource<'a> {
    pub id: &'a str,
    pub position: Vec2,
    pub window: &'a Waveform,
    /// Material band applied to this source's paths.
    pub band: usize,
}

impl<'a> ActiveSource<'a> {
    /// `None` when the object is not currently emitting.
    pub fn from_object(obj: &'a ObjectInstance, window: &'a Waveform, band: usize) -> Option<Self> {
        obj.emitting.then(|| Self {
            id: &obj.id,
            position: obj.position,
            window,
            band,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinauralFrame {
    pub left: Waveform,
    pub right: Waveform,
    /// Set when any sample had to be hard-clipped into [-1, 1].
    pub clipped: bool,
}

impl BinauralFrame {
    pub fn silent(len: usize) -> Self {
        Self {
            left: Waveform::silence(len),
            right: Waveform::silence(len),
            clipped: false,
        }
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.left.duration()
    }

    /// Sum of both channels.
    pub fn downmix(&self) -> Waveform {
        self.left.mix(&self.right)
    }
}

fn rir_for(
    scene: &Scene,
    source: Vec2,
    ear: Vec2,
    cfg: &RirConfig,
    cache: Option<&RirCache>,
) -> Result<Arc<super::ImpulseResponse>, AcousticsError> {
    match cache {
        Some(c) => c.get_or_compute(scene, source, ear, cfg),
        None => compute_rir(scene, source, ear, cfg).map(Arc::new),
    }
}

/// Per-ear sum of source windows convolved with their impulse responses,
/// trimmed to the window length, before clipping.
pub fn render_binaural_raw(
    scene: &Scene,
    sources: &[ActiveSource<'_>],
    agent: &AgentState,
    ears: &EarGeometry,
    cfg: &RirConfig,
    cache: Option<&RirCache>,
) -> Result<(Vec<f64>, Vec<f64>), AcousticsError> {
    let len = sources.iter().map(|s| s.window.len()).max().unwrap_or(0);
    let mut left = vec![0.0; len];
    let mut right = vec![0.0; len];
    let (le, re) = ears.ear_positions(agent.base, agent.heading);
    for src in sources {
        if src.window.sample_rate != SAMPLE_RATE {
            return Err(AcousticsError::RateMismatch(src.window.sample_rate, SAMPLE_RATE));
        }
        let cfg = RirConfig { band: src.band, ..*cfg };
        let window_len = src.window.len();
        let lr = rir_for(scene, src.position, le, &cfg, cache)?;
        convolve_into(&src.window.samples, &lr.taps, &mut left[..window_len]);
        let rr = rir_for(scene, src.position, re, &cfg, cache)?;
        convolve_into(&src.window.samples, &rr.taps, &mut right[..window_len]);
    }
    Ok((left, right))
}

/// Renders the binaural frame heard by the agent. Samples outside [-1, 1] are
/// hard-clipped and flagged; no renormalization is applied.
pub fn render_binaural(
    scene: &Scene,
    sources: &[ActiveSource<'_>],
    agent: &AgentState,
    ears: &EarGeometry,
    cfg: &RirConfig,
    cache: Option<&RirCache>,
) -> Result<BinauralFrame, AcousticsError> {
    let (mut left, mut right) = render_binaural_raw(scene, sources, agent, ears, cfg, cache)?;
    let mut clipped = false;
    for s in left.iter_mut().chain(right.iter_mut()) {
        if s.abs() > 1.0 {
            *s = s.clamp(-1.0, 1.0);
            clipped = true;
        }
    }
    if clipped {
        log::debug!("binaural render clipped");
    }
    Ok(BinauralFrame {
        left: Waveform::new(left),
        right: Waveform::new(right),
        clipped,
    })
}
