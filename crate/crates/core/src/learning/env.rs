//! Audio-goal navigation environment: reach and stop next to a looping sound
//! source in an empty room, using only binaural cues and a range scan.

use super::net::ACTIONS;
use super::LearningError;
use crate::acoustics::{EarGeometry, RirCache, RirConfig};
use crate::perception::{direction_features, range_scan, AudioFeatures, Listener, RangeScan, ScanConfig};
use crate::soundbank::{SoundBank, Split};
use crate::world::{
    build_occupancy_grid, AgentAction, AgentState, Category, MaterialProperties, NavAction, ObjectInstance, ObjectKind,
    OccupancyGrid, Scene, Vec2, World,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

/// Width of [`nav_features`] for a scan with `rays` rays.
pub fn feature_width(rays: usize) -> usize {
    8 + rays + ACTIONS
}

/// Direction cues, band shares, normalized scan ranges and a one-hot of the
/// previous action. Interaural delay alone cannot tell front from back, and
/// the previous turn is what lets a memoryless policy break that tie.
pub fn nav_features(audio: &AudioFeatures, scan: &RangeScan, ears: &EarGeometry, previous: Option<NavAction>) -> Vec<f64> {
    let mut f = Vec::with_capacity(feature_width(scan.ranges.len()));
    f.push((audio.ild_db / 10.0).clamp(-3.0, 3.0));
    f.push(audio.itd_samples as f64 / ears.max_itd_samples().max(1) as f64);
    f.push(((audio.level_db + 10.0) / 5.0).clamp(-3.0, 3.0));
    f.push(if audio.silent { 1.0 } else { 0.0 });
    f.extend_from_slice(&audio.band_energies);
    f.extend(scan.ranges.iter().map(|r| r / scan.max_range));
    f.extend((0..ACTIONS).map(|a| if previous.map(NavAction::index) == Some(a) { 1.0 } else { 0.0 }));
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub success: f64,
    pub step_penalty: f64,
    /// Weight on the per-step reduction of distance to the goal.
    pub shaping: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            success: 10.0,
            step_penalty: 0.01,
            shaping: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub room_size: f64,
    pub success_radius: f64,
    pub max_steps: usize,
    /// Audio window heard per step, seconds.
    pub window_seconds: f64,
    /// Minimum start distance from the source.
    pub min_start_distance: f64,
    pub scan: ScanConfig,
    pub reward: RewardConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            room_size: 6.0,
            success_radius: 0.5,
            max_steps: 100,
            window_seconds: 0.1,
            min_start_distance: 1.0,
            scan: ScanConfig {
                ray_count: 5,
                fov: PI,
                max_range: 3.0,
            },
            reward: RewardConfig::default(),
        }
    }
}

/// Listener hearing what the navigation policy was trained on: short windows,
/// a low-order room response and the configured scan.
pub fn policy_listener(bank: Arc<SoundBank>, config: &EnvConfig) -> Listener {
    let mut listener = Listener::new(bank);
    listener.scan = config.scan;
    listener.step_seconds = config.window_seconds;
    listener.rir = RirConfig {
        max_order: 2,
        max_length: 0.1,
        ..RirConfig::default()
    };
    listener
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
}

/// Discrete-action episodic environment.
pub trait NavEnv: Send {
    fn observation_width(&self) -> usize;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, LearningError>;
    fn step(&mut self, action: NavAction) -> Result<Transition, LearningError>;
}

/// One fixed clip in a closed square room. Each episode places the source and
/// the agent on random free cell centers.
pub struct AudioGoalEnv {
    pub config: EnvConfig,
    listener: Listener,
    scene: Arc<Scene>,
    grid: Arc<OccupancyGrid>,
    clip_id: String,
    world: Option<World>,
    steps: usize,
    distance: f64,
    previous: Option<NavAction>,
}

pub const SOURCE_ID: &str = "goal";

impl AudioGoalEnv {
    /// Uses the first training clip of `category`.
    pub fn new(bank: Arc<SoundBank>, category: Category, config: EnvConfig) -> Result<Self, LearningError> {
        let clip_id = bank
            .clips_of(category, Split::Train)
            .next()
            .map(|c| c.clip_id.clone())
            .ok_or_else(|| LearningError::Config(format!("no training clip for {category}")))?;
        let scene = Scene::rectangular_room("nav_room", config.room_size, config.room_size, 0.5, MaterialProperties::uniform(0.5, 0.0));
        let grid = Arc::new(build_occupancy_grid(&scene)?);
        Ok(Self {
            listener: policy_listener(bank, &config),
            config,
            scene: Arc::new(scene),
            grid,
            clip_id,
            world: None,
            steps: 0,
            distance: 0.0,
            previous: None,
        })
    }

    /// Listener configured as the environment hears; share it with a
    /// [`super::PolicyNavController`] so features match training.
    pub fn listener(&self) -> &Listener {
        &self.listener
    }

    pub fn world(&self) -> Option<&World> {
        self.world.as_ref()
    }

    fn observe(&self) -> Result<Vec<f64>, LearningError> {
        let world = self.world.as_ref().ok_or(LearningError::NotReset)?;
        let frame = self.listener.render(world, self.steps)?;
        let audio = direction_features(&frame, &self.listener.ears);
        let scan = range_scan(&world.grid, world.agent.base, world.agent.heading, &self.listener.scan);
        Ok(nav_features(&audio, &scan, &self.listener.ears, self.previous))
    }

    fn goal_distance(&self) -> f64 {
        let w = self.world.as_ref().expect("reset");
        w.agent.base.distance(w.objects[0].position)
    }
}

impl NavEnv for AudioGoalEnv {
    fn observation_width(&self) -> usize {
        feature_width(self.config.scan.ray_count)
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, LearningError> {
        let cells: Vec<Vec2> = self.grid.free_cells().map(|c| self.grid.cell_center(c)).collect();
        let source = *cells.choose(rng).ok_or(LearningError::NotReset)?;
        let starts: Vec<Vec2> = cells
            .iter()
            .copied()
            .filter(|p| p.distance(source) > self.config.min_start_distance)
            .collect();
        let start = *starts.choose(rng).ok_or(LearningError::NotReset)?;
        let heading = FRAC_PI_2 * rng.gen_range(0..4) as f64;
        let object = ObjectInstance {
            id: SOURCE_ID.into(),
            category: Category::Alarm,
            kind: ObjectKind::Rigid,
            position: source,
            height: 0.0,
            orientation: 0.0,
            sound_clip: Some(self.clip_id.clone()),
            emitting: true,
            fixture: None,
        };
        let agent = AgentState::new(start, heading);
        self.world = Some(World::with_grid(self.scene.clone(), self.grid.clone(), agent, vec![object])?);
        // Impulse responses are only reused within an episode.
        self.listener.cache = Arc::new(RirCache::new());
        self.steps = 0;
        self.previous = None;
        self.distance = self.goal_distance();
        self.observe()
    }

    fn step(&mut self, action: NavAction) -> Result<Transition, LearningError> {
        let world = self.world.as_mut().ok_or(LearningError::NotReset)?;
        let r = self.config.reward;
        self.steps += 1;
        self.previous = Some(action);
        let mut reward = -r.step_penalty;
        let (done, success) = if action == NavAction::Stop {
            let ok = self.distance <= self.config.success_radius + 1e-9;
            if ok {
                reward += r.success;
            }
            (true, ok)
        } else {
            world.step(AgentAction::Nav(action));
            let d = self.goal_distance();
            reward += r.shaping * (self.distance - d);
            self.distance = d;
            (self.steps >= self.config.max_steps, false)
        };
        Ok(Transition {
            observation: self.observe()?,
            reward,
            done,
            success,
        })
    }
}
