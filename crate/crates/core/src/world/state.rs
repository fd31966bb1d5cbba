//! Mutable episode world: the agent plus placed objects on top of an immutable scene.

use super::agent::{step_agent, AgentAction, AgentState};
use super::geometry::Vec2;
use super::grid::{build_occupancy_grid, OccupancyGrid};
use super::kinematics::EndEffector;
use super::scene::{Scene, DOOR_HANDLE_HEIGHT, SINK_HANDLE_HEIGHT};
use super::WorldError;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Alarm,
    Furby,
    Phone,
    Sink,
    Doorbell,
    Distractor,
}

impl Category {
    /// The five sound-emitting categories, in table order.
    pub const SOUNDING: [Category; 5] = [
        Category::Alarm,
        Category::Furby,
        Category::Phone,
        Category::Sink,
        Category::Doorbell,
    ];

    pub fn is_sounding(self) -> bool {
        self != Category::Distractor
    }

    /// Graspable categories handled by pick and place.
    pub fn is_rigid(self) -> bool {
        matches!(
            self,
            Category::Alarm | Category::Furby | Category::Phone | Category::Distractor
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Alarm => "Alarm",
            Category::Furby => "Furby",
            Category::Phone => "Phone",
            Category::Sink => "Sink",
            Category::Doorbell => "Doorbell",
            Category::Distractor => "Distractor",
        }
    }

    pub fn sounding_index(self) -> Option<usize> {
        Self::SOUNDING.iter().position(|c| *c == self)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = WorldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "alarm" => Ok(Category::Alarm),
            "furby" => Ok(Category::Furby),
            "phone" => Ok(Category::Phone),
            "sink" => Ok(Category::Sink),
            "doorbell" => Ok(Category::Doorbell),
            "distractor" => Ok(Category::Distractor),
            _ => Err(WorldError::UnknownCategory(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObjectKind {
    Rigid,
    Articulated { joint_angle: f64, limits: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: String,
    pub category: Category,
    pub kind: ObjectKind,
    pub position: Vec2,
    /// Support height (receptacle surface, or fixture handle height).
    pub height: f64,
    pub orientation: f64,
    pub sound_clip: Option<String>,
    pub emitting: bool,
    /// Door or sink id in the scene for articulated objects.
    pub fixture: Option<String>,
}

impl ObjectInstance {
    pub fn joint_angle(&self) -> Option<f64> {
        match self.kind {
            ObjectKind::Articulated { joint_angle, .. } => Some(joint_angle),
            ObjectKind::Rigid => None,
        }
    }

    pub fn check(&self) -> Result<(), WorldError> {
        if let ObjectKind::Articulated { joint_angle, limits } = self.kind {
            if joint_angle < limits[0] - 1e-12 || joint_angle > limits[1] + 1e-12 {
                return Err(WorldError::InvalidObject(format!(
                    "{}: joint angle {joint_angle} outside {limits:?}",
                    self.id
                )));
            }
        }
        if self.emitting && self.sound_clip.is_none() {
            return Err(WorldError::InvalidObject(format!(
                "{}: emitting without a clip",
                self.id
            )));
        }
        Ok(())
    }
}

/// One episode's world. The scene and grid are shared read-only.
#[derive(Debug, Clone)]
pub struct World {
    pub scene: Arc<Scene>,
    pub grid: Arc<OccupancyGrid>,
    pub agent: AgentState,
    pub objects: Vec<ObjectInstance>,
    /// Articulated object currently attached to the end-effector.
    pub attached: Option<String>,
}

impl World {
    pub fn new(scene: Arc<Scene>, agent: AgentState, objects: Vec<ObjectInstance>) -> Result<Self, WorldError> {
        scene.validate()?;
        let grid = Arc::new(build_occupancy_grid(&scene)?);
        Self::with_grid(scene, grid, agent, objects)
    }

    pub fn with_grid(
        scene: Arc<Scene>,
        grid: Arc<OccupancyGrid>,
        agent: AgentState,
        objects: Vec<ObjectInstance>,
    ) -> Result<Self, WorldError> {
        for o in &objects {
            o.check()?;
            if !scene.bounds.contains(o.position) {
                return Err(WorldError::OutsideBounds(o.id.clone()));
            }
        }
        if !grid.is_free_point(agent.base) {
            return Err(WorldError::AgentBlocked(agent.base));
        }
        Ok(Self {
            scene,
            grid,
            agent,
            objects,
            attached: None,
        })
    }

    pub fn object(&self, id: &str) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: &str) -> Option<&mut ObjectInstance> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn end_effector(&self) -> EndEffector {
        self.agent.end_effector()
    }

    /// Point the gripper must reach to interact with `obj`: the handle for doors
    /// and sinks, the object itself otherwise.
    pub fn interaction_point(&self, obj: &ObjectInstance) -> (Vec2, f64) {
        if let Some(fixture) = &obj.fixture {
            if let Some(door) = self.scene.find_door(fixture) {
                let angle = obj.joint_angle().unwrap_or(0.0);
                return (door.handle_at(angle), DOOR_HANDLE_HEIGHT);
            }
            if let Some(sink) = self.scene.sinks.iter().find(|s| &s.id == fixture) {
                return (sink.handle_pivot, SINK_HANDLE_HEIGHT);
            }
        }
        (obj.position, obj.height)
    }

    /// Sounding objects whose emitting flag is set.
    pub fn emitting_sources(&self) -> impl Iterator<Item = &ObjectInstance> {
        self.objects.iter().filter(|o| o.emitting)
    }

    pub fn silence(&mut self, id: &str) {
        if let Some(o) = self.object_mut(id) {
            o.emitting = false;
        }
    }

    /// Applies one action. Returns whether the base collided.
    ///
    /// While an articulated object is attached, the applied change of the first
    /// arm joint drives the object's joint angle (clamped to its limits). A held
    /// rigid object follows the end-effector.
    pub fn step(&mut self, action: AgentAction) -> bool {
        let result = step_agent(&self.agent, action, &self.grid);
        self.agent = result.state;
        if let Some(id) = self.attached.clone() {
            let delta = result.applied_deltas[0];
            if let Some(obj) = self.object_mut(&id) {
                if let ObjectKind::Articulated { joint_angle, limits } = &mut obj.kind {
                    *joint_angle = (*joint_angle + delta).clamp(limits[0], limits[1]);
                }
            }
            self.sync_fixture_position(&id);
        }
        self.sync_held();
        result.collided
    }

    fn sync_fixture_position(&mut self, id: &str) {
        let Some(obj) = self.object(id) else { return };
        let Some(fixture) = obj.fixture.clone() else { return };
        let angle = obj.joint_angle().unwrap_or(0.0);
        if let Some(door) = self.scene.find_door(&fixture) {
            let p = door.handle_at(angle);
            if let Some(o) = self.object_mut(id) {
                o.position = p;
            }
        }
    }

    /// Moves the held object onto the end-effector.
    pub fn sync_held(&mut self) {
        if let Some(id) = self.agent.held_object.clone() {
            let ee = self.end_effector();
            if let Some(o) = self.object_mut(&id) {
                o.position = ee.position;
                o.height = ee.height;
            }
        }
    }
}
