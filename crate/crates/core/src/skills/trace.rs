//! Per-step skill traces, written as JSON lines.

use crate::planner::Skill;
use crate::world::{AgentAction, EndEffector, Vec2};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Quantities the success predicate of the current skill looks at.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PredicateState {
    /// Navigation: base to goal. Pick: end-effector to object. Place: object to
    /// target. Door and sink: end-effector to handle.
    pub distance: f64,
    pub grasped: bool,
    pub at_rest: bool,
    pub collided: bool,
    pub joint_angle: Option<f64>,
}

impl PredicateState {
    pub fn distance(distance: f64) -> Self {
        Self {
            distance,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub skill: Skill,
    pub step: usize,
    pub action: Option<AgentAction>,
    pub base: Vec2,
    pub heading: f64,
    pub end_effector: EndEffector,
    pub predicate: PredicateState,
}

pub fn write_trace<W: Write>(mut out: W, steps: &[TraceStep]) -> std::io::Result<()> {
    for s in steps {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
