//! Image-source room impulse responses over axis-aligned wall segments.
//!
//! Every sequence of up to `max_order` distinct-consecutive wall reflections is
//! mirrored into an image position and then validated by tracing back from the
//! receiver: each reflection point must land on its wall segment, and each leg
//! of the unfolded path is attenuated by the transmission of any wall it passes
//! through. A path of length `d` contributes
//! `1/max(d, 0.1) * prod sqrt(1 - absorption) * prod sqrt(transmission)` at
//! sample `round(d / c * fs)`.

use super::{AcousticsError, ImpulseResponse, MIN_DISTANCE, SAMPLE_RATE, SPEED_OF_SOUND};
use crate::world::{segment_intersection_params, segments_cross, Scene, Vec2, Wall};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RirConfig {
    pub max_order: usize,
    /// Impulse response length, seconds.
    pub max_length: f64,
    /// Index of the absorption band applied to every path (0..4).
    pub band: usize,
}

impl Default for RirConfig {
    fn default() -> Self {
        Self {
            max_order: 3,
            max_length: 0.5,
            band: 1,
        }
    }
}

impl RirConfig {
    pub fn length_samples(&self) -> usize {
        (self.max_length * SAMPLE_RATE as f64).round() as usize
    }
}

/// One validated propagation path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTap {
    /// Walls hit, in order from the source.
    pub reflections: Vec<usize>,
    pub length: f64,
    pub delay: usize,
    pub amplitude: f64,
}

fn mirror(p: Vec2, wall: &Wall) -> Vec2 {
    if wall.a.x == wall.b.x {
        Vec2::new(2.0 * wall.a.x - p.x, p.y)
    } else {
        Vec2::new(p.x, 2.0 * wall.a.y - p.y)
    }
}

fn delay_samples(length: f64) -> usize {
    (length / SPEED_OF_SOUND * SAMPLE_RATE as f64).round() as usize
}

struct Tracer<'a> {
    walls: &'a [Wall],
    reflect: Vec<f64>,
    transmit: Vec<f64>,
}

impl Tracer<'_> {
    /// Transmission gain of the straight leg `a..b`, ignoring walls in `skip`.
    fn leg_gain(&self, a: Vec2, b: Vec2, skip: [Option<usize>; 2]) -> f64 {
        let mut gain = 1.0;
        for (i, w) in self.walls.iter().enumerate() {
            if skip.contains(&Some(i)) {
                continue;
            }
            if segments_cross(a, b, w.a, w.b) {
                gain *= self.transmit[i];
                if gain == 0.0 {
                    return 0.0;
                }
            }
        }
        gain
    }

    /// Validates the image reached through `seq` and returns its path, if audible.
    fn trace(&self, source: Vec2, ear: Vec2, seq: &[usize], images: &[Vec2]) -> Option<PathTap> {
        const EPS: f64 = 1e-9;
        let image = *images.last().unwrap_or(&source);
        let length = ear.distance(image);
        let mut gain = 1.0 / length.max(MIN_DISTANCE);
        let mut p = ear;
        let mut came_from: Option<usize> = None;
        for k in (0..seq.len()).rev() {
            let w = &self.walls[seq[k]];
            let target = images[k];
            let (t, u) = segment_intersection_params(p, target, w.a, w.b)?;
            if t <= EPS || t >= 1.0 - EPS || u < -EPS || u > 1.0 + EPS {
                return None;
            }
            let hit = p + (target - p) * t;
            gain *= self.leg_gain(p, hit, [came_from, Some(seq[k])]);
            gain *= self.reflect[seq[k]];
            if gain == 0.0 {
                return None;
            }
            p = hit;
            came_from = Some(seq[k]);
        }
        gain *= self.leg_gain(p, source, [came_from, None]);
        (gain != 0.0).then(|| PathTap {
            reflections: seq.to_vec(),
            length,
            delay: delay_samples(length),
            amplitude: gain,
        })
    }
}

/// Enumerates every audible path from `source` to `ear`.
pub fn trace_paths(scene: &Scene, source: Vec2, ear: Vec2, cfg: &RirConfig) -> Result<Vec<PathTap>, AcousticsError> {
    if !scene.bounds.contains(source) {
        return Err(AcousticsError::OutOfBounds(source));
    }
    if !scene.bounds.contains(ear) {
        return Err(AcousticsError::OutOfBounds(ear));
    }
    let mut reflect = Vec::with_capacity(scene.walls.len());
    let mut transmit = Vec::with_capacity(scene.walls.len());
    for w in &scene.walls {
        let m = scene
            .material(&w.material)
            .ok_or_else(|| AcousticsError::UnknownMaterial(w.material.clone()))?;
        let band = cfg.band.min(m.absorption.len() - 1);
        reflect.push((1.0 - m.absorption[band]).max(0.0).sqrt());
        transmit.push(m.transmission[band].max(0.0).sqrt());
    }
    let tracer = Tracer {
        walls: &scene.walls,
        reflect,
        transmit,
    };
    let mut paths = Vec::new();
    if let Some(direct) = tracer.trace(source, ear, &[], &[]) {
        paths.push(direct);
    }
    let mut seq = Vec::with_capacity(cfg.max_order);
    let mut images = Vec::with_capacity(cfg.max_order);
    expand(&tracer, source, ear, cfg.max_order, &mut seq, &mut images, &mut paths);
    Ok(paths)
}

fn expand(
    tracer: &Tracer<'_>,
    source: Vec2,
    ear: Vec2,
    max_order: usize,
    seq: &mut Vec<usize>,
    images: &mut Vec<Vec2>,
    out: &mut Vec<PathTap>,
) {
    if seq.len() == max_order {
        return;
    }
    let parent = *images.last().unwrap_or(&source);
    for (i, wall) in tracer.walls.iter().enumerate() {
        if seq.last() == Some(&i) || tracer.reflect[i] == 0.0 {
            continue;
        }
        let img = mirror(parent, wall);
        seq.push(i);
        images.push(img);
        if let Some(tap) = tracer.trace(source, ear, seq, images) {
            out.push(tap);
        }
        expand(tracer, source, ear, max_order, seq, images, out);
        seq.pop();
        images.pop();
    }
}

/// Room impulse response from `source` to `ear`, `cfg.max_length` seconds long.
pub fn compute_rir(scene: &Scene, source: Vec2, ear: Vec2, cfg: &RirConfig) -> Result<ImpulseResponse, AcousticsError> {
    let paths = trace_paths(scene, source, ear, cfg)?;
    let len = cfg.length_samples();
    let mut taps = vec![0.0; len];
    for p in paths {
        if p.delay < len {
            taps[p.delay] += p.amplitude;
        }
    }
    Ok(ImpulseResponse {
        taps,
        sample_rate: SAMPLE_RATE,
        source,
        ear,
    })
}
