//! The five skills as controller loops with their success predicates, scripted
//! oracle controllers, and sequential chain execution.

mod oracle;
mod trace;

pub use oracle::{ArmOracle, NavOracle};
pub use trace::{write_trace, PredicateState, TraceStep};

use crate::episodes::{nav_goal, Episode, PlaceTarget, SourceSpec};
use crate::planner::{Skill, SkillChain};
use crate::world::{AgentAction, NavAction, ObjectKind, RestingPose, Vec2, World};
use serde::{Deserialize, Serialize};

/// Slack on inclusive threshold comparisons, absorbing float drift of values
/// that are nominally on the boundary.
pub const THRESHOLD_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureReason {
    Timeout,
    StoppedOutOfRange,
    NoGrasp,
    DroppedObject,
    NoRetract,
    JointShort,
    AngleOutOfTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillOutcome {
    pub skill: Skill,
    pub success: bool,
    pub steps: usize,
    pub failure_reason: Option<FailureReason>,
}

impl SkillOutcome {
    fn succeeded(skill: Skill, steps: usize) -> Self {
        Self {
            skill,
            success: true,
            steps,
            failure_reason: None,
        }
    }

    fn failed(skill: Skill, steps: usize, reason: FailureReason) -> Self {
        Self {
            skill,
            success: false,
            steps,
            failure_reason: Some(reason),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillConfig {
    pub nav_budget: usize,
    pub manip_budget: usize,
    pub nav_radius: f64,
    pub snap_distance: f64,
    pub place_threshold_m: f64,
    /// Door angle to reach while attached, radians.
    pub door_open_threshold: f64,
    pub sink_tolerance: f64,
    pub rest: RestingPose,
}

impl Default for SkillConfig {
    fn default() -> Self {
        Self {
            nav_budget: 500,
            manip_budget: 200,
            nav_radius: 0.5,
            snap_distance: 0.15,
            place_threshold_m: 0.15,
            door_open_threshold: 1.22,
            sink_tolerance: 0.2,
            rest: RestingPose::default(),
        }
    }
}

/// What a skill acts on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillTarget {
    pub skill: Skill,
    pub object_id: String,
    pub nav_goal: Vec2,
    pub place_target: Option<PlaceTarget>,
}

impl SkillTarget {
    pub fn for_source(world: &World, source: &SourceSpec, skill: Skill) -> Self {
        Self {
            skill,
            object_id: source.object.id.clone(),
            nav_goal: nav_goal(&world.scene, &source.object),
            place_target: source.place_target.clone(),
        }
    }
}

/// Produces one action per step. Returning `None` ends the skill; for
/// navigation it is the same as `Stop`.
pub trait Controller: Send {
    fn reset(&mut self, _world: &World, _target: &SkillTarget) {}
    fn act(&mut self, world: &World, target: &SkillTarget) -> Option<AgentAction>;
}

pub type BoxedController = Box<dyn Controller>;

/// One controller per skill.
pub struct Controllers {
    pub nav: BoxedController,
    pub pick: BoxedController,
    pub place: BoxedController,
    pub open_door: BoxedController,
    pub close_sink: BoxedController,
}

impl Controllers {
    /// Scripted controllers for every skill.
    pub fn oracle() -> Self {
        Self::with_nav(Box::new(NavOracle::default()))
    }

    /// Scripted manipulation with a custom navigation controller.
    pub fn with_nav(nav: BoxedController) -> Self {
        Self {
            nav,
            pick: Box::new(ArmOracle::new(Skill::Pick)),
            place: Box::new(ArmOracle::new(Skill::Place)),
            open_door: Box::new(ArmOracle::new(Skill::OpenDoor)),
            close_sink: Box::new(ArmOracle::new(Skill::CloseSink)),
        }
    }

    pub fn get(&mut self, skill: Skill) -> &mut dyn Controller {
        match skill {
            Skill::Nav => self.nav.as_mut(),
            Skill::Pick => self.pick.as_mut(),
            Skill::Place => self.place.as_mut(),
            Skill::OpenDoor => self.open_door.as_mut(),
            Skill::CloseSink => self.close_sink.as_mut(),
        }
    }
}

pub struct SkillContext<'a> {
    pub world: &'a mut World,
    pub target: SkillTarget,
    pub config: &'a SkillConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillRun {
    pub outcome: SkillOutcome,
    pub trace: Vec<TraceStep>,
}

fn within(value: f64, threshold: f64) -> bool {
    value <= threshold + THRESHOLD_SLACK
}

struct Recorder {
    skill: Skill,
    trace: Vec<TraceStep>,
}

impl Recorder {
    fn push(&mut self, step: usize, action: Option<AgentAction>, world: &World, predicate: PredicateState) {
        self.trace.push(TraceStep {
            skill: self.skill,
            step,
            action,
            base: world.agent.base,
            heading: world.agent.heading,
            end_effector: world.end_effector(),
            predicate,
        });
    }

    fn finish(self, outcome: SkillOutcome) -> SkillRun {
        SkillRun {
            outcome,
            trace: self.trace,
        }
    }
}

/// Gripper transition produced by one step.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Gripper {
    Closed,
    Opened,
    Unchanged,
}

fn apply(world: &mut World, action: AgentAction) -> (bool, Gripper) {
    let before = world.agent.gripper_closed;
    let collided = world.step(action);
    let after = world.agent.gripper_closed;
    let g = match (before, after) {
        (false, true) => Gripper::Closed,
        (true, false) => Gripper::Opened,
        _ => Gripper::Unchanged,
    };
    (collided, g)
}

pub fn run_navigate(ctx: &mut SkillContext<'_>, controller: &mut dyn Controller) -> SkillRun {
    let (world, target, cfg) = (&mut *ctx.world, &ctx.target, ctx.config);
    let mut rec = Recorder {
        skill: Skill::Nav,
        trace: Vec::new(),
    };
    controller.reset(world, target);
    for step in 0..cfg.nav_budget {
        let action = controller.act(world, target).unwrap_or(AgentAction::Nav(NavAction::Stop));
        let mut collided = false;
        if action != AgentAction::Nav(NavAction::Stop) {
            collided = apply(world, action).0;
            if collided {
                log::debug!("navigation collision at step {step}");
            }
        }
        let d = world.agent.base.distance(target.nav_goal);
        rec.push(
            step,
            Some(action),
            world,
            PredicateState {
                distance: d,
                collided,
                ..Default::default()
            },
        );
        if action == AgentAction::Nav(NavAction::Stop) {
            let outcome = if within(d, cfg.nav_radius) {
                SkillOutcome::succeeded(Skill::Nav, step + 1)
            } else {
                SkillOutcome::failed(Skill::Nav, step + 1, FailureReason::StoppedOutOfRange)
            };
            return rec.finish(outcome);
        }
    }
    rec.finish(SkillOutcome::failed(Skill::Nav, cfg.nav_budget, FailureReason::Timeout))
}

pub fn run_pick(ctx: &mut SkillContext<'_>, controller: &mut dyn Controller) -> SkillRun {
    let (world, target, cfg) = (&mut *ctx.world, &ctx.target, ctx.config);
    let mut rec = Recorder {
        skill: Skill::Pick,
        trace: Vec::new(),
    };
    let id = target.object_id.as_str();
    let rigid = world.object(id).is_some_and(|o| o.kind == ObjectKind::Rigid);
    let mut grasped = world.agent.held_object.as_deref() == Some(id);
    controller.reset(world, target);
    for step in 0..cfg.manip_budget {
        let Some(action) = controller.act(world, target) else {
            let reason = if grasped { FailureReason::NoRetract } else { FailureReason::NoGrasp };
            return rec.finish(SkillOutcome::failed(Skill::Pick, step, reason));
        };
        let (_, g) = apply(world, action);
        let distance = world
            .object(id)
            .map_or(f64::INFINITY, |o| world.end_effector().distance_to(o.position, o.height));
        match g {
            Gripper::Closed if !grasped => {
                if rigid && within(distance, cfg.snap_distance) {
                    world.agent.held_object = Some(id.to_string());
                    world.sync_held();
                    grasped = true;
                } else {
                    rec.push(step, Some(action), world, PredicateState::distance(distance));
                    return rec.finish(SkillOutcome::failed(Skill::Pick, step + 1, FailureReason::NoGrasp));
                }
            }
            Gripper::Opened if grasped => {
                world.agent.held_object = None;
                rec.push(step, Some(action), world, PredicateState::distance(distance));
                return rec.finish(SkillOutcome::failed(Skill::Pick, step + 1, FailureReason::DroppedObject));
            }
            _ => {}
        }
        let at_rest = cfg.rest.is_at_rest(&world.agent.arm);
        rec.push(
            step,
            Some(action),
            world,
            PredicateState {
                distance,
                grasped,
                at_rest,
                ..Default::default()
            },
        );
        if grasped && at_rest {
            return rec.finish(SkillOutcome::succeeded(Skill::Pick, step + 1));
        }
    }
    rec.finish(SkillOutcome::failed(Skill::Pick, cfg.manip_budget, FailureReason::Timeout))
}

pub fn run_place(ctx: &mut SkillContext<'_>, controller: &mut dyn Controller) -> SkillRun {
    let (world, target, cfg) = (&mut *ctx.world, &ctx.target, ctx.config);
    let mut rec = Recorder {
        skill: Skill::Place,
        trace: Vec::new(),
    };
    let id = target.object_id.as_str();
    let holding = world.agent.held_object.as_deref() == Some(id);
    let Some(goal) = target.place_target.clone().filter(|_| holding) else {
        return rec.finish(SkillOutcome::failed(Skill::Place, 0, FailureReason::DroppedObject));
    };
    let mut placed = false;
    controller.reset(world, target);
    for step in 0..cfg.manip_budget {
        let Some(action) = controller.act(world, target) else {
            let reason = if placed { FailureReason::NoRetract } else { FailureReason::Timeout };
            return rec.finish(SkillOutcome::failed(Skill::Place, step, reason));
        };
        let (_, g) = apply(world, action);
        let mut distance = world.object(id).map_or(f64::INFINITY, |o| o.position.distance(goal.position));
        if g == Gripper::Opened && !placed {
            // The object settles straight down onto whatever is below it.
            let ee = world.end_effector();
            world.agent.held_object = None;
            let support = world.scene.receptacle_at(ee.position).map(|r| (r.id.clone(), r.height));
            if let Some(o) = world.object_mut(id) {
                o.position = ee.position;
                o.height = support.as_ref().map_or(0.0, |s| s.1);
            }
            distance = ee.position.distance(goal.position);
            let on_target = support.is_some_and(|(rid, h)| rid == goal.receptacle && h == goal.height);
            if !on_target || !within(distance, cfg.place_threshold_m) {
                rec.push(step, Some(action), world, PredicateState::distance(distance));
                return rec.finish(SkillOutcome::failed(Skill::Place, step + 1, FailureReason::DroppedObject));
            }
            placed = true;
        }
        let at_rest = cfg.rest.is_at_rest(&world.agent.arm);
        rec.push(
            step,
            Some(action),
            world,
            PredicateState {
                distance,
                grasped: !placed,
                at_rest,
                ..Default::default()
            },
        );
        if placed && at_rest {
            return rec.finish(SkillOutcome::succeeded(Skill::Place, step + 1));
        }
    }
    rec.finish(SkillOutcome::failed(Skill::Place, cfg.manip_budget, FailureReason::Timeout))
}

/// Shared loop for door and sink: attach by proximity, drive the joint,
/// detach and return to rest.
fn run_articulated(
    skill: Skill,
    ctx: &mut SkillContext<'_>,
    controller: &mut dyn Controller,
    reached: impl Fn(f64, &SkillConfig) -> bool,
    short: FailureReason,
) -> SkillRun {
    let (world, target, cfg) = (&mut *ctx.world, &ctx.target, ctx.config);
    let mut rec = Recorder { skill, trace: Vec::new() };
    let id = target.object_id.as_str();
    let fixture_ok = world.object(id).is_some_and(|o| {
        let Some(f) = o.fixture.as_deref() else { return false };
        match skill {
            Skill::OpenDoor => world.scene.find_door(f).is_some(),
            _ => world.scene.sinks.iter().any(|s| s.id == f),
        }
    });
    if !fixture_ok {
        return rec.finish(SkillOutcome::failed(skill, 0, short));
    }
    let mut achieved = false;
    controller.reset(world, target);
    for step in 0..cfg.manip_budget {
        let Some(action) = controller.act(world, target) else {
            let reason = if achieved { FailureReason::NoRetract } else { short };
            return rec.finish(SkillOutcome::failed(skill, step, reason));
        };
        let (_, g) = apply(world, action);
        let obj = world.object(id).cloned().expect("fixture object checked above");
        let (point, height) = world.interaction_point(&obj);
        let distance = world.end_effector().distance_to(point, height);
        match g {
            Gripper::Closed if within(distance, cfg.snap_distance) => world.attached = Some(id.to_string()),
            Gripper::Opened => world.attached = None,
            _ => {}
        }
        let attached = world.attached.as_deref() == Some(id);
        let angle = obj.joint_angle().unwrap_or(0.0);
        if attached && reached(angle, cfg) {
            achieved = true;
        }
        let at_rest = cfg.rest.is_at_rest(&world.agent.arm);
        rec.push(
            step,
            Some(action),
            world,
            PredicateState {
                distance,
                grasped: attached,
                at_rest,
                joint_angle: Some(angle),
                ..Default::default()
            },
        );
        if achieved && !attached && !world.agent.gripper_closed && at_rest {
            if skill == Skill::CloseSink {
                world.silence(id);
            }
            return rec.finish(SkillOutcome::succeeded(skill, step + 1));
        }
    }
    rec.finish(SkillOutcome::failed(skill, cfg.manip_budget, FailureReason::Timeout))
}

pub fn run_open_door(ctx: &mut SkillContext<'_>, controller: &mut dyn Controller) -> SkillRun {
    run_articulated(
        Skill::OpenDoor,
        ctx,
        controller,
        |a, cfg| a >= cfg.door_open_threshold - THRESHOLD_SLACK,
        FailureReason::JointShort,
    )
}

pub fn run_close_sink(ctx: &mut SkillContext<'_>, controller: &mut dyn Controller) -> SkillRun {
    run_articulated(
        Skill::CloseSink,
        ctx,
        controller,
        |a, cfg| within(a.abs(), cfg.sink_tolerance),
        FailureReason::AngleOutOfTolerance,
    )
}

pub fn run_skill(ctx: &mut SkillContext<'_>, controller: &mut dyn Controller) -> SkillRun {
    match ctx.target.skill {
        Skill::Nav => run_navigate(ctx, controller),
        Skill::Pick => run_pick(ctx, controller),
        Skill::Place => run_place(ctx, controller),
        Skill::OpenDoor => run_open_door(ctx, controller),
        Skill::CloseSink => run_close_sink(ctx, controller),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    /// Episode source the stage acted on.
    pub source: usize,
    pub outcomes: Vec<SkillOutcome>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub stages: Vec<StageResult>,
    pub overall: bool,
    pub trace: Vec<TraceStep>,
}

impl ChainResult {
    pub fn outcomes(&self) -> impl Iterator<Item = &SkillOutcome> {
        self.stages.iter().flat_map(|s| s.outcomes.iter())
    }
}

/// Runs each stage of `chain` against the episode source at the same position
/// in the priority order, stopping at the first failed skill. A completed
/// stage silences its source before the next stage starts.
pub fn run_chain(
    world: &mut World,
    episode: &Episode,
    chain: &SkillChain,
    controllers: &mut Controllers,
    config: &SkillConfig,
) -> ChainResult {
    let mut stages = Vec::new();
    let mut trace = Vec::new();
    let mut overall = true;
    for (k, skills) in chain.stages().into_iter().enumerate() {
        let source = episode.priority_order[k.min(episode.priority_order.len() - 1)];
        let spec = &episode.sources[source];
        let mut outcomes = Vec::new();
        let mut ok = true;
        for &skill in skills {
            let target = SkillTarget::for_source(world, spec, skill);
            let mut ctx = SkillContext {
                world: &mut *world,
                target,
                config,
            };
            let run = run_skill(&mut ctx, controllers.get(skill));
            log::debug!("{} {:?}", episode.episode_id, run.outcome);
            trace.extend(run.trace);
            outcomes.push(run.outcome);
            if !run.outcome.success {
                ok = false;
                break;
            }
        }
        if ok {
            world.silence(&spec.object.id);
        }
        stages.push(StageResult {
            source,
            outcomes,
            success: ok,
        });
        if !ok {
            overall = false;
            break;
        }
    }
    ChainResult { stages, overall, trace }
}
