//! Rejection sampling of episodes over a scene pool.

use super::validate::{nav_goal, stop_cells, validate_with_grid, PLACE_REACH};
use super::{ground_truth_chain, Episode, EpisodeError, PlaceTarget, Pose, SourceSpec, Task, TOP_INSET};
use crate::soundbank::{SoundBank, Split};
use crate::world::{
    build_occupancy_grid, Category, Cell, ObjectInstance, ObjectKind, OccupancyGrid, Receptacle, Rect, Scene, Vec2,
    DOOR_HANDLE_HEIGHT, SINK_HANDLE_HEIGHT,
};
use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

pub const MAX_RETRIES: usize = 100;

/// Distance of a rigid source from the edge of its receptacle top that faces
/// the access cell.
const EDGE_OFFSET: f64 = 0.1;
const MIN_SEPARATION: f64 = 0.2;
const MIN_START_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationConfig {
    /// Force the two sources of a dual-source episode into different categories.
    pub distinct_categories: bool,
    pub max_retries: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            distinct_categories: true,
            max_retries: MAX_RETRIES,
        }
    }
}

/// Scenes with their occupancy grids, shared between episodes.
#[derive(Debug, Clone)]
pub struct ScenePool {
    pub scenes: Vec<Arc<Scene>>,
    pub grids: Vec<Arc<OccupancyGrid>>,
}

impl ScenePool {
    pub fn new(scenes: Vec<Scene>) -> Result<Self, EpisodeError> {
        let grids = scenes
            .iter()
            .map(|s| build_occupancy_grid(s).map(Arc::new))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            scenes: scenes.into_iter().map(Arc::new).collect(),
            grids,
        })
    }

    pub fn find(&self, id: &str) -> Option<(&Arc<Scene>, &Arc<OccupancyGrid>)> {
        let i = self.scenes.iter().position(|s| s.id == id)?;
        Some((&self.scenes[i], &self.grids[i]))
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }
}

fn sample_in(rect: &Rect, rng: &mut ChaCha8Rng) -> Vec2 {
    Vec2::new(rng.gen_range(rect.min.x..=rect.max.x), rng.gen_range(rect.min.y..=rect.max.y))
}

fn shrink(r: &Rect, by: f64) -> Rect {
    Rect::new(r.min.x + by, r.min.y + by, r.max.x - by, r.max.y - by)
}

fn cardinal(rng: &mut ChaCha8Rng) -> f64 {
    FRAC_PI_2 * rng.gen_range(-1..=2) as f64
}

/// Receptacle cells paired with a free neighbor the agent can stand in.
fn access_options(grid: &OccupancyGrid, rec: &Receptacle) -> Vec<(Cell, Cell)> {
    let own: Vec<Cell> = grid.cells().filter(|&c| grid.cell_rect(c).overlaps(&rec.top)).collect();
    let mut out = Vec::new();
    for &c in &own {
        for n in grid.neighbors4(c) {
            if grid.is_free(n) && !own.contains(&n) {
                out.push((c, n));
            }
        }
    }
    out
}

struct Draft {
    sources: Vec<SourceSpec>,
    /// Points other placements must keep clear of.
    occupied: Vec<Vec2>,
}

impl Draft {
    fn clear_of(&self, p: Vec2) -> bool {
        self.occupied.iter().all(|q| q.distance(p) >= MIN_SEPARATION)
    }
}

fn place_rigid(
    draft: &mut Draft,
    scene: &Scene,
    grid: &OccupancyGrid,
    base: ObjectInstance,
    rng: &mut ChaCha8Rng,
) -> Option<SourceSpec> {
    let rec = scene.receptacles.choose(rng)?;
    let &(cell, access) = access_options(grid, rec).choose(rng)?;
    let (cc, ac) = (grid.cell_center(cell), grid.cell_center(access));
    let side = (ac - cc) * (1.0 / grid.cell_size);
    let inward = grid.cell_size / 2.0 - TOP_INSET - EDGE_OFFSET;
    let position = cc + side * inward + side.perp() * rng.gen_range(-0.05..=0.05);
    if !rec.top.contains(position) || !draft.clear_of(position) {
        return None;
    }
    let stops = stop_cells(grid, position);
    let area = shrink(&rec.top, TOP_INSET);
    let target = (0..64).map(|_| sample_in(&area, rng)).find(|p| {
        stops.iter().all(|s| s.distance(*p) <= PLACE_REACH)
            && p.distance(position) >= MIN_SEPARATION
            && draft.clear_of(*p)
    })?;
    draft.occupied.extend([position, target]);
    Some(SourceSpec {
        object: ObjectInstance {
            position,
            height: rec.height,
            ..base
        },
        receptacle: Some(rec.id.clone()),
        place_target: Some(PlaceTarget {
            receptacle: rec.id.clone(),
            position: target,
            height: rec.height,
        }),
    })
}

fn place_source(
    draft: &mut Draft,
    scene: &Scene,
    grid: &OccupancyGrid,
    category: Category,
    clip: String,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Option<SourceSpec> {
    let taken: Vec<&str> = draft.sources.iter().filter_map(|s| s.object.fixture.as_deref()).collect();
    let base = ObjectInstance {
        id: format!("source_{index}_{}", category.as_str()),
        category,
        kind: ObjectKind::Rigid,
        position: Vec2::ZERO,
        height: 0.0,
        orientation: rng.gen_range(-PI..PI),
        sound_clip: Some(clip),
        emitting: true,
        fixture: None,
    };
    match category {
        Category::Doorbell => {
            let door = scene.doors.iter().filter(|d| !taken.contains(&d.id.as_str())).choose(rng)?;
            Some(SourceSpec {
                object: ObjectInstance {
                    kind: ObjectKind::Articulated {
                        joint_angle: 0.0,
                        limits: [0.0, 1.6],
                    },
                    position: door.handle_at(0.0),
                    height: DOOR_HANDLE_HEIGHT,
                    fixture: Some(door.id.clone()),
                    ..base
                },
                receptacle: None,
                place_target: None,
            })
        }
        Category::Sink => {
            let sink = scene.sinks.iter().filter(|s| !taken.contains(&s.id.as_str())).choose(rng)?;
            Some(SourceSpec {
                object: ObjectInstance {
                    kind: ObjectKind::Articulated {
                        joint_angle: rng.gen_range(0.5..=1.2),
                        limits: [0.0, 1.57],
                    },
                    position: sink.center(),
                    height: SINK_HANDLE_HEIGHT,
                    fixture: Some(sink.id.clone()),
                    ..base
                },
                receptacle: None,
                place_target: None,
            })
        }
        _ => place_rigid(draft, scene, grid, base, rng),
    }
}

fn sample_categories(task: Task, cfg: &GenerationConfig, rng: &mut ChaCha8Rng) -> Vec<Category> {
    let pool = task.categories();
    let first = *pool.choose(rng).unwrap();
    if task.source_count() == 1 {
        return vec![first];
    }
    let second = if cfg.distinct_categories {
        *pool.iter().filter(|&&c| c != first).collect::<Vec<_>>().choose(rng).copied().unwrap()
    } else {
        *pool.choose(rng).unwrap()
    };
    vec![first, second]
}

fn attempt(
    task: Task,
    pool: &ScenePool,
    bank: &SoundBank,
    split: Split,
    episode_id: &str,
    cfg: &GenerationConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Episode> {
    let k = rng.gen_range(0..pool.len());
    let (scene, grid) = (&pool.scenes[k], &pool.grids[k]);
    let categories = sample_categories(task, cfg, rng);
    let mut draft = Draft {
        sources: Vec::new(),
        occupied: Vec::new(),
    };
    for (i, &cat) in categories.iter().enumerate() {
        let clip = bank.clips_of(cat, split).choose(rng)?.clip_id.clone();
        let src = place_source(&mut draft, scene, grid, cat, clip, i, rng)?;
        draft.sources.push(src);
    }

    let mut distractors = Vec::new();
    for i in 0..task.distractor_count() {
        let rec = scene.receptacles.choose(rng)?;
        let area = shrink(&rec.top, TOP_INSET);
        let p = (0..32).map(|_| sample_in(&area, rng)).find(|p| draft.clear_of(*p))?;
        draft.occupied.push(p);
        distractors.push(ObjectInstance {
            id: format!("distractor_{i}"),
            category: Category::Distractor,
            kind: ObjectKind::Rigid,
            position: p,
            height: rec.height,
            orientation: rng.gen_range(-PI..PI),
            sound_clip: None,
            emitting: false,
            fixture: None,
        });
    }

    let goals: Vec<Vec2> = draft.sources.iter().map(|s| nav_goal(scene, &s.object)).collect();
    let start = grid
        .free_cells()
        .map(|c| grid.cell_center(c))
        .filter(|p| goals.iter().all(|g| g.distance(*p) > MIN_START_DISTANCE))
        .choose(rng)?;

    let mut priority_order: Vec<usize> = (0..categories.len()).collect();
    priority_order.shuffle(rng);
    let ground_truth_chains = categories.iter().map(|&c| ground_truth_chain(c).ok()).collect::<Option<_>>()?;
    let episode = Episode {
        episode_id: episode_id.to_string(),
        task,
        scene_id: scene.id.clone(),
        split,
        agent_start: Pose {
            position: start,
            heading: cardinal(rng),
        },
        sources: draft.sources,
        priority_order,
        distractors,
        ground_truth_chains,
        distinct_categories: cfg.distinct_categories && task.source_count() == 2,
    };
    validate_with_grid(&episode, scene, grid).passed().then_some(episode)
}

/// Draws scenes, sources, distractors and a start pose until the result passes
/// validation or `cfg.max_retries` attempts are used up.
pub fn generate_episode(
    task: Task,
    pool: &ScenePool,
    bank: &SoundBank,
    split: Split,
    episode_id: &str,
    cfg: &GenerationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Episode, EpisodeError> {
    if pool.is_empty() {
        return Err(EpisodeError::EmptyPool);
    }
    (0..cfg.max_retries)
        .find_map(|_| attempt(task, pool, bank, split, episode_id, cfg, rng))
        .ok_or(EpisodeError::GenerationExhausted(cfg.max_retries))
}
