//! Scripted controllers with privileged access to the world state.

use super::{Controller, SkillTarget};
use crate::planner::Skill;
use crate::world::{
    inverse_kinematics, normalize_angle, AgentAction, ArmAction, ArmJoints, NavAction, Vec2, World, ARM_JOINTS,
    MAX_JOINT_DELTA,
};
use std::f64::consts::FRAC_PI_2;

/// Follows an A* path over free cells, turns toward the goal, then stops.
#[derive(Debug, Clone, Copy)]
pub struct NavOracle {
    pub radius: f64,
}

impl Default for NavOracle {
    fn default() -> Self {
        Self { radius: 0.5 }
    }
}

fn turn_toward(heading: f64, desired: f64) -> Option<NavAction> {
    let diff = normalize_angle(desired - heading);
    if diff.abs() < 1e-6 {
        None
    } else if diff > 0.0 {
        Some(NavAction::TurnLeft)
    } else {
        Some(NavAction::TurnRight)
    }
}

fn cardinal_heading(v: Vec2) -> f64 {
    (v.angle() / FRAC_PI_2).round() * FRAC_PI_2
}

impl Controller for NavOracle {
    fn act(&mut self, world: &World, target: &SkillTarget) -> Option<AgentAction> {
        let grid = &world.grid;
        let agent = &world.agent;
        let goal = target.nav_goal;
        let radius = self.radius + super::THRESHOLD_SLACK;
        if agent.base.distance(goal) <= radius {
            let turn = turn_toward(agent.heading, cardinal_heading(goal - agent.base));
            return Some(AgentAction::Nav(turn.unwrap_or(NavAction::Stop)));
        }
        let start = grid.cell_of(agent.base)?;
        let path = grid.astar(start, |c| grid.cell_center(c).distance(goal) <= radius, Some((goal, radius)))?;
        let next = *path.get(1)?;
        let desired = (grid.cell_center(next) - agent.base).angle();
        Some(AgentAction::Nav(turn_toward(agent.heading, desired).unwrap_or(NavAction::MoveForward)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Reach,
    Grip,
    Drive,
    Release,
    Retract,
    Done,
}

/// Joint-space scripted arm: reach the interaction point by IK, operate the
/// gripper (and sweep the joint for doors and sinks), then return to rest.
#[derive(Debug, Clone)]
pub struct ArmOracle {
    skill: Skill,
    phase: Phase,
    /// Margin past the door threshold the sweep aims for.
    pub door_margin: f64,
    pub door_threshold: f64,
}

impl ArmOracle {
    pub fn new(skill: Skill) -> Self {
        Self {
            skill,
            phase: Phase::Reach,
            door_margin: 0.05,
            door_threshold: 1.22,
        }
    }
}

/// Clamped step from `current` toward `goal`; `None` once there.
fn step_toward(current: &ArmJoints, goal: &ArmJoints) -> Option<ArmAction> {
    let mut action = ArmAction::hold();
    let mut moving = false;
    for i in 0..ARM_JOINTS {
        let d = goal[i] - current[i];
        if d.abs() > 1e-9 {
            moving = true;
        }
        action.joint_deltas[i] = d.clamp(-MAX_JOINT_DELTA[i], MAX_JOINT_DELTA[i]);
    }
    moving.then_some(action)
}

impl ArmOracle {
    fn reach_goal(&self, world: &World, target: &SkillTarget) -> Option<ArmJoints> {
        let agent = &world.agent;
        let (point, height) = match self.skill {
            Skill::Place => {
                let t = target.place_target.as_ref()?;
                (t.position, t.height)
            }
            _ => world.interaction_point(world.object(&target.object_id)?),
        };
        inverse_kinematics(point, height, agent.base, agent.heading)
    }
}

impl Controller for ArmOracle {
    fn reset(&mut self, _world: &World, _target: &SkillTarget) {
        self.phase = Phase::Reach;
    }

    fn act(&mut self, world: &World, target: &SkillTarget) -> Option<AgentAction> {
        loop {
            let arm = &world.agent.arm;
            match self.phase {
                Phase::Reach => match step_toward(arm, &self.reach_goal(world, target)?) {
                    Some(a) => return Some(AgentAction::Arm(a)),
                    None => self.phase = Phase::Grip,
                },
                Phase::Grip => {
                    self.phase = match self.skill {
                        Skill::Pick => Phase::Retract,
                        Skill::Place => Phase::Retract,
                        _ => Phase::Drive,
                    };
                    let g = if self.skill == Skill::Place { -1.0 } else { 1.0 };
                    return Some(AgentAction::Arm(ArmAction::gripper(g)));
                }
                Phase::Drive => {
                    let angle = world.object(&target.object_id)?.joint_angle()?;
                    let delta = match self.skill {
                        Skill::OpenDoor => (self.door_threshold + self.door_margin - angle).max(0.0),
                        _ => -angle,
                    };
                    if delta.abs() <= 1e-12 {
                        self.phase = Phase::Release;
                        continue;
                    }
                    let mut a = ArmAction::hold();
                    a.joint_deltas[0] = delta.clamp(-MAX_JOINT_DELTA[0], MAX_JOINT_DELTA[0]);
                    return Some(AgentAction::Arm(a));
                }
                Phase::Release => {
                    self.phase = Phase::Retract;
                    return Some(AgentAction::Arm(ArmAction::gripper(-1.0)));
                }
                Phase::Retract => match step_toward(arm, &[0.0; ARM_JOINTS]) {
                    Some(a) => return Some(AgentAction::Arm(a)),
                    None => self.phase = Phase::Done,
                },
                Phase::Done => return None,
            }
        }
    }
}
