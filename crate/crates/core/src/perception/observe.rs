//! What the agent hears and sees at one step: the binaural frame of every
//! emitting object, its direction cues, and a range scan.

use super::{direction_features, range_scan, AudioFeatures, PerceptionError, RangeScan, ScanConfig};
use crate::acoustics::{render_binaural, ActiveSource, BinauralFrame, EarGeometry, RirCache, RirConfig, Waveform};
use crate::soundbank::{window_of, SoundBank, STEP_SECONDS};
use crate::world::World;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frame: BinauralFrame,
    pub audio: AudioFeatures,
    pub scan: RangeScan,
}

/// Renders world audio from the sound bank, sharing one impulse-response cache.
#[derive(Debug, Clone)]
pub struct Listener {
    pub bank: Arc<SoundBank>,
    pub ears: EarGeometry,
    pub rir: RirConfig,
    pub scan: ScanConfig,
    pub cache: Arc<RirCache>,
    pub step_seconds: f64,
}

impl Listener {
    pub fn new(bank: Arc<SoundBank>) -> Self {
        Self {
            bank,
            ears: EarGeometry::default(),
            rir: RirConfig::default(),
            scan: ScanConfig::default(),
            cache: Arc::new(RirCache::new()),
            step_seconds: STEP_SECONDS,
        }
    }

    /// Frame heard at step `t_step` from every emitting object except those in `exclude`.
    pub fn render_excluding(&self, world: &World, t_step: usize, exclude: &[&str]) -> Result<BinauralFrame, PerceptionError> {
        let mut windows: Vec<(usize, Waveform, usize)> = Vec::new();
        for (i, obj) in world.objects.iter().enumerate() {
            if !obj.emitting || exclude.contains(&obj.id.as_str()) {
                continue;
            }
            let Some(clip_id) = obj.sound_clip.as_deref() else { continue };
            let clip = self.bank.get(clip_id)?;
            windows.push((i, window_of(clip, t_step, self.step_seconds), clip.dominant_band));
        }
        if windows.is_empty() {
            let len = (self.step_seconds * crate::acoustics::SAMPLE_RATE as f64).round() as usize;
            return Ok(BinauralFrame::silent(len));
        }
        let sources: Vec<ActiveSource<'_>> = windows
            .iter()
            .map(|(i, w, band)| ActiveSource {
                id: &world.objects[*i].id,
                position: world.objects[*i].position,
                window: w,
                band: *band,
            })
            .collect();
        Ok(render_binaural(&world.scene, &sources, &world.agent, &self.ears, &self.rir, Some(&self.cache))?)
    }

    pub fn render(&self, world: &World, t_step: usize) -> Result<BinauralFrame, PerceptionError> {
        self.render_excluding(world, t_step, &[])
    }

    pub fn observe(&self, world: &World, t_step: usize) -> Result<Observation, PerceptionError> {
        let frame = self.render(world, t_step)?;
        let audio = direction_features(&frame, &self.ears);
        let scan = range_scan(&world.grid, world.agent.base, world.agent.heading, &self.scan);
        Ok(Observation { frame, audio, scan })
    }
}
