//! Geometric, kinematic and object state of the simulated environment.

mod agent;
mod geometry;
mod grid;
mod kinematics;
mod scene;
mod state;

pub use agent::{step_agent, AgentAction, AgentState, ArmAction, NavAction, StepResult, MOVE_STEP_M};
pub use geometry::{normalize_angle, point_segment_distance, segment_intersection_params, segments_cross, Rect, Vec2};
pub use grid::{build_occupancy_grid, Cell, OccupancyGrid};
pub use kinematics::{
    forward_kinematics, inverse_kinematics, max_reach, ArmJoints, EndEffector, RestingPose, ARM_JOINTS,
    JOINT_LIMITS, LINK_LENGTHS, MAX_JOINT_DELTA, PRISMATIC_JOINT, SHOULDER_HEIGHT,
};
pub use scene::{
    DoorSpec, MaterialProperties, Receptacle, Scene, SinkSpec, Wall, BAND_COUNT, DOOR_HANDLE_HEIGHT,
    SCENE_SCHEMA_VERSION, SINK_HANDLE_HEIGHT,
};
pub use state::{Category, ObjectInstance, ObjectKind, World};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("scene bounds have zero area")]
    DegenerateScene,
    #[error("cell size must be positive, got {0}")]
    InvalidCellSize(f64),
    #[error("unsupported scene schema version {0}")]
    SchemaVersion(u32),
    #[error("unknown material `{0}`")]
    UnknownMaterial(String),
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("{0} is not axis-aligned")]
    NotAxisAligned(String),
    #[error("{0} lies outside the scene bounds")]
    OutsideBounds(String),
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
    #[error("invalid object: {0}")]
    InvalidObject(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("agent base {0:?} is not in a free cell")]
    AgentBlocked(Vec2),
    #[error("scene json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
