//! Solvability checks: every source reachable from the start, and free space
//! in front of every door and sink source.

use super::{ground_truth_chain, Episode};
use crate::world::{build_occupancy_grid, Category, ObjectInstance, OccupancyGrid, Rect, Scene, Vec2};
use serde::{Deserialize, Serialize};

/// Navigation succeeds within this distance of the goal, meters.
pub const NAV_RADIUS: f64 = 0.5;
/// Depth of the clear region required in front of doors and sinks, meters.
pub const FRONTAL_DEPTH: f64 = 0.8;
/// Place targets must be within this planar distance of every cell the agent
/// may stop in after navigating to the object.
pub const PLACE_REACH: f64 = 0.75;
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ValidationFailure {
    SceneMismatch,
    StartBlocked,
    WrongSourceCount { expected: usize, found: usize },
    WrongDistractorCount { expected: usize, found: usize },
    IllegalCategory { source: usize },
    DuplicateCategory,
    BadPriority,
    ChainMismatch { source: usize },
    MissingClip { source: usize },
    MissingFixture { source: usize },
    NotElevated { source: usize },
    PlaceOutOfReach { source: usize },
    Unreachable { source: usize },
    NoFrontalAccess { source: usize },
    InvalidObject { id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self) -> String {
        self.failures
            .iter()
            .map(|f| serde_json::to_string(f).unwrap_or_default())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Point the agent must stop near to interact with `obj`: a door's handle, a
/// sink's faucet pivot, or the object itself.
pub fn nav_goal(scene: &Scene, obj: &ObjectInstance) -> Vec2 {
    if let Some(fixture) = &obj.fixture {
        if let Some(door) = scene.find_door(fixture) {
            return door.handle_at(obj.joint_angle().unwrap_or(0.0));
        }
        if let Some(sink) = scene.sinks.iter().find(|s| &s.id == fixture) {
            return sink.handle_pivot;
        }
    }
    obj.position
}

/// Centers of free cells where navigation toward `goal` counts as arrived.
pub fn stop_cells(grid: &OccupancyGrid, goal: Vec2) -> Vec<Vec2> {
    grid.free_cells()
        .map(|c| grid.cell_center(c))
        .filter(|p| p.distance(goal) <= NAV_RADIUS + SLACK)
        .collect()
}

/// Whether the axis-aligned segment `a..b` passes through the open interior of `r`.
fn segment_enters(a: Vec2, b: Vec2, r: &Rect) -> bool {
    let (lo_x, hi_x) = (a.x.min(b.x), a.x.max(b.x));
    let (lo_y, hi_y) = (a.y.min(b.y), a.y.max(b.y));
    if lo_x == hi_x {
        r.min.x < lo_x && lo_x < r.max.x && lo_y.max(r.min.y) < hi_y.min(r.max.y)
    } else {
        r.min.y < lo_y && lo_y < r.max.y && lo_x.max(r.min.x) < hi_x.min(r.max.x)
    }
}

fn frontal_region_free(scene: &Scene, region: &Rect, own: Option<&str>) -> bool {
    if !scene.bounds.contains_rect(region) {
        return false;
    }
    let walls = scene.walls.iter().map(|w| (w.a, w.b));
    let doors = scene
        .doors
        .iter()
        .filter(|d| Some(d.id.as_str()) != own)
        .map(|d| (d.hinge, d.leaf_end));
    if walls.chain(doors).any(|(a, b)| segment_enters(a, b, region)) {
        return false;
    }
    let rects = scene
        .receptacles
        .iter()
        .map(|r| r.top)
        .chain(scene.sinks.iter().filter(|s| Some(s.id.as_str()) != own).map(|s| s.footprint));
    for r in rects {
        if r.overlaps(region) {
            return false;
        }
    }
    true
}

/// Clear rectangle in front of the object's fixture, if it has one.
fn frontal_region(scene: &Scene, obj: &ObjectInstance) -> Option<Rect> {
    let fixture = obj.fixture.as_deref()?;
    if let Some(d) = scene.find_door(fixture) {
        let far = d.leaf_end + d.interaction_normal() * FRONTAL_DEPTH;
        return Some(Rect::new(d.hinge.x, d.hinge.y, far.x, far.y));
    }
    scene.sinks.iter().find(|s| s.id == fixture).map(|s| s.frontal_region(FRONTAL_DEPTH))
}

pub fn validate_episode(episode: &Episode, scene: &Scene) -> ValidationReport {
    match build_occupancy_grid(scene) {
        Ok(grid) => validate_with_grid(episode, scene, &grid),
        Err(_) => ValidationReport {
            failures: vec![ValidationFailure::SceneMismatch],
        },
    }
}

pub fn validate_with_grid(episode: &Episode, scene: &Scene, grid: &OccupancyGrid) -> ValidationReport {
    use ValidationFailure as F;
    let mut failures = Vec::new();
    if episode.scene_id != scene.id {
        failures.push(F::SceneMismatch);
    }
    let task = episode.task;
    if episode.sources.len() != task.source_count() {
        failures.push(F::WrongSourceCount {
            expected: task.source_count(),
            found: episode.sources.len(),
        });
    }
    if episode.distractors.len() != task.distractor_count() {
        failures.push(F::WrongDistractorCount {
            expected: task.distractor_count(),
            found: episode.distractors.len(),
        });
    }
    let mut order = episode.priority_order.clone();
    order.sort_unstable();
    if order != (0..episode.sources.len()).collect::<Vec<_>>() {
        failures.push(F::BadPriority);
    }
    if episode.distinct_categories
        && episode.sources.len() == 2
        && episode.sources[0].category() == episode.sources[1].category()
    {
        failures.push(F::DuplicateCategory);
    }
    for o in episode.objects() {
        if o.check().is_err() || !scene.bounds.contains(o.position) {
            failures.push(F::InvalidObject { id: o.id.clone() });
        }
    }
    for d in &episode.distractors {
        if d.category != Category::Distractor || d.emitting {
            failures.push(F::InvalidObject { id: d.id.clone() });
        }
    }

    let start = grid.cell_of(episode.agent_start.position).filter(|c| grid.is_free(*c));
    if start.is_none() {
        failures.push(F::StartBlocked);
    }
    for (i, src) in episode.sources.iter().enumerate() {
        let obj = &src.object;
        if !task.categories().contains(&obj.category) {
            failures.push(F::IllegalCategory { source: i });
        }
        if ground_truth_chain(obj.category).ok().as_ref() != episode.ground_truth_chains.get(i) {
            failures.push(F::ChainMismatch { source: i });
        }
        if obj.sound_clip.is_none() || !obj.emitting {
            failures.push(F::MissingClip { source: i });
        }
        match obj.category {
            Category::Doorbell | Category::Sink => {
                let ok = obj.fixture.as_deref().is_some_and(|f| {
                    if obj.category == Category::Doorbell {
                        scene.find_door(f).is_some()
                    } else {
                        scene.sinks.iter().any(|s| s.id == f)
                    }
                });
                if !ok {
                    failures.push(F::MissingFixture { source: i });
                } else if !frontal_region(scene, obj).is_some_and(|r| frontal_region_free(scene, &r, obj.fixture.as_deref())) {
                    failures.push(F::NoFrontalAccess { source: i });
                }
            }
            _ => {
                let on_top = scene
                    .receptacle_at(obj.position)
                    .is_some_and(|r| obj.height > 0.0 && (obj.height - r.height).abs() < 1e-9);
                let target_ok = src.place_target.as_ref().is_some_and(|t| {
                    scene
                        .receptacle_at(t.position)
                        .is_some_and(|r| r.id == t.receptacle && (t.height - r.height).abs() < 1e-9)
                });
                if !on_top || !target_ok {
                    failures.push(F::NotElevated { source: i });
                } else if let Some(t) = &src.place_target {
                    if stop_cells(grid, obj.position).iter().any(|c| c.distance(t.position) > PLACE_REACH) {
                        failures.push(F::PlaceOutOfReach { source: i });
                    }
                }
            }
        }
        if let Some(start) = start {
            let goal = nav_goal(scene, obj);
            let radius = NAV_RADIUS + SLACK;
            let path = grid.astar(start, |c| grid.cell_center(c).distance(goal) <= radius, Some((goal, radius)));
            if path.is_none() {
                failures.push(F::Unreachable { source: i });
            }
        }
    }
    ValidationReport { failures }
}
