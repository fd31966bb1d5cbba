//! Agent state and the two action spaces: discrete navigation and 8-DoF arm control.

use super::geometry::{normalize_angle, Vec2};
use super::grid::OccupancyGrid;
use super::kinematics::{forward_kinematics, ArmJoints, EndEffector, ARM_JOINTS, JOINT_LIMITS, MAX_JOINT_DELTA};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Distance covered by one `MoveForward`, meters.
pub const MOVE_STEP_M: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub base: Vec2,
    /// Radians in (-pi, pi].
    pub heading: f64,
    pub arm: ArmJoints,
    pub gripper_closed: bool,
    pub held_object: Option<String>,
}

impl AgentState {
    pub fn new(base: Vec2, heading: f64) -> Self {
        Self {
            base,
            heading: normalize_angle(heading),
            arm: [0.0; ARM_JOINTS],
            gripper_closed: false,
            held_object: None,
        }
    }

    pub fn end_effector(&self) -> EndEffector {
        forward_kinematics(&self.arm, self.base, self.heading)
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NavAction {
    MoveForward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl NavAction {
    pub const ALL: [NavAction; 4] = [
        NavAction::MoveForward,
        NavAction::TurnLeft,
        NavAction::TurnRight,
        NavAction::Stop,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

/// 8-DoF continuous command: seven joint deltas plus a gripper scalar
/// (positive closes, negative opens, zero leaves it unchanged).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmAction {
    pub joint_deltas: ArmJoints,
    pub gripper: f64,
}

impl ArmAction {
    pub fn hold() -> Self {
        Self {
            joint_deltas: [0.0; ARM_JOINTS],
            gripper: 0.0,
        }
    }

    pub fn gripper(value: f64) -> Self {
        Self {
            joint_deltas: [0.0; ARM_JOINTS],
            gripper: value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AgentAction {
    Nav(NavAction),
    Arm(ArmAction),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: AgentState,
    pub collided: bool,
    /// Joint deltas actually applied after clamping.
    pub applied_deltas: ArmJoints,
}

/// Advances the agent by one action. Collisions leave the pose unchanged.
pub fn step_agent(state: &AgentState, action: AgentAction, grid: &OccupancyGrid) -> StepResult {
    let mut next = state.clone();
    let mut collided = false;
    let mut applied = [0.0; ARM_JOINTS];
    match action {
        AgentAction::Nav(NavAction::MoveForward) => {
            let target = state.base + state.forward() * MOVE_STEP_M;
            if grid.segment_is_free(state.base, target) {
                next.base = target;
            } else {
                log::debug!("collision moving from {:?} toward {:?}", state.base, target);
                collided = true;
            }
        }
        AgentAction::Nav(NavAction::TurnLeft) => {
            next.heading = normalize_angle(state.heading + FRAC_PI_2);
        }
        AgentAction::Nav(NavAction::TurnRight) => {
            next.heading = normalize_angle(state.heading - FRAC_PI_2);
        }
        AgentAction::Nav(NavAction::Stop) => {}
        AgentAction::Arm(arm) => {
            for i in 0..ARM_JOINTS {
                let d = if arm.joint_deltas[i].is_finite() {
                    arm.joint_deltas[i].clamp(-MAX_JOINT_DELTA[i], MAX_JOINT_DELTA[i])
                } else {
                    0.0
                };
                let [lo, hi] = JOINT_LIMITS[i];
                let q = (state.arm[i] + d).clamp(lo, hi);
                applied[i] = q - state.arm[i];
                next.arm[i] = q;
            }
            if arm.gripper > 0.0 {
                next.gripper_closed = true;
            } else if arm.gripper < 0.0 {
                next.gripper_closed = false;
            }
        }
    }
    StepResult {
        state: next,
        collided,
        applied_deltas: applied,
    }
}
