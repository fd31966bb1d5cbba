//! Abstract 7-joint arm: a planar 3-link revolute chain (joints 0..3) that sweeps
//! in the horizontal plane around the base, a prismatic height joint (joint 3),
//! and three wrist joints (4..7) that carry no kinematic effect.
//!
//! With all joints at zero the chain folds to a short forward offset
//! (0.3 - 0.3 + 0.2 = 0.2 m ahead of the base at shoulder height).

use super::geometry::{normalize_angle, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const ARM_JOINTS: usize = 7;
pub const LINK_LENGTHS: [f64; 3] = [0.3, 0.3, 0.2];
pub const SHOULDER_HEIGHT: f64 = 0.5;
pub const PRISMATIC_JOINT: usize = 3;

/// Per-joint position limits `[lo, hi]`.
pub const JOINT_LIMITS: [[f64; 2]; ARM_JOINTS] = [
    [-PI, PI],
    [-PI, PI],
    [-PI, PI],
    [-0.5, 0.7],
    [-PI, PI],
    [-PI, PI],
    [-PI, PI],
];

/// Largest per-step joint change; radians for revolute joints, meters for the prismatic one.
pub const MAX_JOINT_DELTA: [f64; ARM_JOINTS] = [0.1, 0.1, 0.1, 0.05, 0.1, 0.1, 0.1];

pub type ArmJoints = [f64; ARM_JOINTS];

/// End-effector position: planar point plus height above the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndEffector {
    pub position: Vec2,
    pub height: f64,
}

impl EndEffector {
    pub fn distance_to(&self, point: Vec2, height: f64) -> f64 {
        let d = self.position - point;
        (d.x * d.x + d.y * d.y + (self.height - height).powi(2)).sqrt()
    }
}

pub fn max_reach() -> f64 {
    LINK_LENGTHS.iter().sum()
}

/// Absolute link headings for the three revolute links.
fn link_angles(joints: &ArmJoints, heading: f64) -> [f64; 3] {
    let a1 = heading + joints[0];
    let a2 = a1 + PI + joints[1];
    let a3 = a2 + PI + joints[2];
    [a1, a2, a3]
}

pub fn forward_kinematics(joints: &ArmJoints, base: Vec2, heading: f64) -> EndEffector {
    let mut p = base;
    for (angle, len) in link_angles(joints, heading).iter().zip(LINK_LENGTHS) {
        p += Vec2::from_angle(*angle) * len;
    }
    EndEffector {
        position: p,
        height: SHOULDER_HEIGHT + joints[PRISMATIC_JOINT],
    }
}

/// Joint configuration placing the end-effector at `target`/`height`, with the
/// wrist joints left at zero. `None` when out of planar reach or height range.
pub fn inverse_kinematics(target: Vec2, height: f64, base: Vec2, heading: f64) -> Option<ArmJoints> {
    let local = (target - base).rotate(-heading);
    let r = local.norm();
    if r > max_reach() + 1e-12 {
        return None;
    }
    let lift = height - SHOULDER_HEIGHT;
    let [lo, hi] = JOINT_LIMITS[PRISMATIC_JOINT];
    if lift < lo - 1e-12 || lift > hi + 1e-12 {
        return None;
    }
    let phi = if r > 0.0 { local.angle() } else { 0.0 };
    // Last link points at the target; the first two links reach the wrist point.
    let wrist_signed = r - LINK_LENGTHS[2];
    let (w, psi) = if wrist_signed >= 0.0 {
        (wrist_signed, phi)
    } else {
        (-wrist_signed, phi + PI)
    };
    let l = LINK_LENGTHS[0];
    let alpha = (w / (2.0 * l)).clamp(-1.0, 1.0).acos();
    let a1 = psi - alpha;
    let a2 = psi + alpha;
    let a3 = phi;
    let mut joints = [0.0; ARM_JOINTS];
    joints[0] = normalize_angle(a1);
    joints[1] = normalize_angle(a2 - a1 - PI);
    joints[2] = normalize_angle(a3 - a2 - PI);
    joints[PRISMATIC_JOINT] = lift.clamp(lo, hi);
    Some(joints)
}

/// Canonical arm configuration a manipulation skill must finish in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestingPose {
    pub joints: ArmJoints,
    /// L-infinity tolerance in radians (meters for the prismatic joint).
    pub tolerance: f64,
}

impl Default for RestingPose {
    fn default() -> Self {
        Self {
            joints: [0.0; ARM_JOINTS],
            tolerance: 0.05,
        }
    }
}

impl RestingPose {
    pub fn deviation(&self, joints: &ArmJoints) -> f64 {
        joints
            .iter()
            .zip(&self.joints)
            .enumerate()
            .map(|(i, (a, b))| {
                if i == PRISMATIC_JOINT {
                    (a - b).abs()
                } else {
                    normalize_angle(a - b).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn is_at_rest(&self, joints: &ArmJoints) -> bool {
        self.deviation(joints) <= self.tolerance
    }
}
