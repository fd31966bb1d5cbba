//! Benchmark episodes: procedural scenes, generation with rejection sampling,
//! solvability validation, and JSON-lines persistence.

mod dataset;
mod generate;
mod scenes;
mod validate;

pub use dataset::{generate_dataset, generate_dataset_with, load_dataset, Dataset, DatasetManifest, Preset, DEFAULT_SCENE_COUNT};
pub use generate::{generate_episode, GenerationConfig, ScenePool, MAX_RETRIES};
pub use scenes::{generate_scene, generate_scene_pool, CELL, DOOR_WIDTH, HANDLE_OFFSET, SINK_SIZE, TOP_INSET};
pub use validate::{nav_goal, stop_cells, validate_episode, validate_with_grid, ValidationFailure, ValidationReport, FRONTAL_DEPTH, NAV_RADIUS, PLACE_REACH};

use crate::planner::{Skill, SkillChain};
use crate::soundbank::Split;
use crate::world::{AgentState, Category, ObjectInstance, OccupancyGrid, Scene, Vec2, World, WorldError};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("no valid episode after {0} attempts")]
    GenerationExhausted(usize),
    #[error("category {0} has no skill chain")]
    UnknownCategory(Category),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("scene pool is empty")]
    EmptyPool,
    #[error("episode {id} references unknown scene {scene}")]
    UnknownScene { id: String, scene: String },
    #[error("episode {id} failed validation: {reasons}")]
    Invalid { id: String, reasons: String },
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Soundbank(#[from] crate::soundbank::SoundbankError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    SonicStow,
    SonicInteract,
    BiSonic,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::SonicStow, Task::SonicInteract, Task::BiSonic];

    /// Categories a source of this task may be drawn from.
    pub fn categories(self) -> &'static [Category] {
        match self {
            Task::SonicStow => &[Category::Phone, Category::Alarm, Category::Furby],
            Task::SonicInteract => &[Category::Doorbell, Category::Sink],
            Task::BiSonic => &Category::SOUNDING,
        }
    }

    pub fn source_count(self) -> usize {
        if self == Task::BiSonic {
            2
        } else {
            1
        }
    }

    pub fn distractor_count(self) -> usize {
        if self == Task::SonicInteract {
            0
        } else {
            2
        }
    }

    /// Short name used on the command line and in file names.
    pub fn slug(self) -> &'static str {
        match self {
            Task::SonicStow => "stow",
            Task::SonicInteract => "interact",
            Task::BiSonic => "bisonic",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::SonicStow => "SonicStow",
            Task::SonicInteract => "SonicInteract",
            Task::BiSonic => "BiSonic",
        })
    }
}

impl FromStr for Task {
    type Err = EpisodeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stow" | "sonicstow" => Ok(Task::SonicStow),
            "interact" | "sonicinteract" => Ok(Task::SonicInteract),
            "bisonic" | "bi-sonic" => Ok(Task::BiSonic),
            _ => Err(EpisodeError::UnknownTask(s.to_string())),
        }
    }
}

/// Skills required to deal with a sound of the given category.
pub fn ground_truth_chain(category: Category) -> Result<Vec<Skill>, EpisodeError> {
    match category {
        Category::Alarm | Category::Phone | Category::Furby => Ok(vec![Skill::Nav, Skill::Pick, Skill::Place]),
        Category::Doorbell => Ok(vec![Skill::Nav, Skill::OpenDoor]),
        Category::Sink => Ok(vec![Skill::Nav, Skill::CloseSink]),
        Category::Distractor => Err(EpisodeError::UnknownCategory(category)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

/// Where a carried object must be set down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceTarget {
    pub receptacle: String,
    pub position: Vec2,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub object: ObjectInstance,
    /// Receptacle the object rests on (rigid sources).
    pub receptacle: Option<String>,
    pub place_target: Option<PlaceTarget>,
}

impl SourceSpec {
    pub fn category(&self) -> Category {
        self.object.category
    }

    pub fn clip_id(&self) -> &str {
        self.object.sound_clip.as_deref().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub task: Task,
    pub scene_id: String,
    pub split: Split,
    pub agent_start: Pose,
    pub sources: Vec<SourceSpec>,
    /// Source indices in interaction order (main source first).
    pub priority_order: Vec<usize>,
    pub distractors: Vec<ObjectInstance>,
    /// Ground-truth chain per source, aligned with `sources`.
    pub ground_truth_chains: Vec<Vec<Skill>>,
    /// Whether the two sources of a dual-source episode were forced distinct.
    #[serde(default)]
    pub distinct_categories: bool,
}

impl Episode {
    /// Sources in interaction order.
    pub fn ordered_sources(&self) -> impl Iterator<Item = (usize, &SourceSpec)> {
        self.priority_order.iter().map(|&i| (i, &self.sources[i]))
    }

    /// The plan a perfect planner would produce.
    pub fn expected_plan(&self) -> SkillChain {
        match self.priority_order.as_slice() {
            [a, b] => SkillChain::Dual {
                first_sound: self.ground_truth_chains[*a].clone(),
                second_sound: self.ground_truth_chains[*b].clone(),
            },
            _ => SkillChain::Single(self.ground_truth_chains[0].clone()),
        }
    }

    /// All placed objects, sources first.
    pub fn objects(&self) -> Vec<ObjectInstance> {
        self.sources
            .iter()
            .map(|s| s.object.clone())
            .chain(self.distractors.iter().cloned())
            .collect()
    }

    pub fn build_world(&self, scene: Arc<Scene>, grid: Arc<OccupancyGrid>) -> Result<World, WorldError> {
        let agent = AgentState::new(self.agent_start.position, self.agent_start.heading);
        World::with_grid(scene, grid, agent, self.objects())
    }
}

pub fn write_episodes<W: Write>(mut out: W, episodes: &[Episode]) -> Result<(), EpisodeError> {
    for e in episodes {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads JSON-lines episodes. Blank lines are skipped.
pub fn read_episodes<R: BufRead>(input: R) -> Result<Vec<Episode>, EpisodeError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| EpisodeError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}
