use echo_core::episodes::{generate_scene_pool, Episode, GenerationConfig, ScenePool, Task, generate_episode, PlaceTarget};
use echo_core::perception::Listener;
use echo_core::planner::{Skill, SkillChain};
use echo_core::skills::{
    run_chain, run_skill, write_trace, ArmOracle, Controller, Controllers, FailureReason, SkillConfig, SkillContext,
    SkillOutcome, SkillRun, SkillTarget,
};
use echo_core::soundbank::{synthesize_bank, SoundBank, Split};
use echo_core::world::{
    build_occupancy_grid, inverse_kinematics, AgentAction, AgentState, ArmAction, ArmJoints, Category, DoorSpec,
    MaterialProperties, NavAction, ObjectInstance, ObjectKind, Rect, Receptacle, Scene, SinkSpec, Vec2, World,
    ARM_JOINTS, MAX_JOINT_DELTA,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

fn bank() -> &'static Arc<SoundBank> {
    static BANK: OnceLock<Arc<SoundBank>> = OnceLock::new();
    BANK.get_or_init(|| Arc::new(synthesize_bank(7)))
}

fn pool() -> &'static ScenePool {
    static POOL: OnceLock<ScenePool> = OnceLock::new();
    POOL.get_or_init(|| ScenePool::new(generate_scene_pool(5, 12)).unwrap())
}

/// Replays a fixed action list, then ends the skill.
struct Script(VecDeque<AgentAction>);

impl Controller for Script {
    fn act(&mut self, _: &World, _: &SkillTarget) -> Option<AgentAction> {
        self.0.pop_front()
    }
}

/// Clamped joint steps from `from` to `to`.
fn moves(from: ArmJoints, to: ArmJoints) -> Vec<AgentAction> {
    let mut q = from;
    let mut out = Vec::new();
    loop {
        let mut a = ArmAction::hold();
        let mut moving = false;
        for i in 0..ARM_JOINTS {
            let d = (to[i] - q[i]).clamp(-MAX_JOINT_DELTA[i], MAX_JOINT_DELTA[i]);
            moving |= d.abs() > 1e-12;
            a.joint_deltas[i] = d;
            q[i] += d;
        }
        if !moving {
            return out;
        }
        out.push(AgentAction::Arm(a));
    }
}

fn grip(v: f64) -> AgentAction {
    AgentAction::Arm(ArmAction::gripper(v))
}

fn test_scene() -> Scene {
    let mut s = Scene::empty("bench", 5.0, 5.0, 0.5);
    s.materials.insert("wall".into(), MaterialProperties::uniform(0.3, 0.0));
    s.materials.insert("door".into(), MaterialProperties::uniform(0.2, 0.0));
    s.receptacles.push(Receptacle {
        id: "table".into(),
        top: Rect::new(3.05, 2.05, 3.45, 2.45),
        height: 0.7,
    });
    s.sinks.push(SinkSpec::square("sink", Vec2::new(1.25, 4.25), 0.4, -std::f64::consts::FRAC_PI_2));
    s.doors.push(DoorSpec {
        id: "door".into(),
        hinge: Vec2::new(0.25, 1.0),
        leaf_end: Vec2::new(0.25, 1.9),
        handle: Vec2::new(0.25, 1.75),
        swing: -1.0,
        material: "door".into(),
    });
    s
}

fn world_with(agent: AgentState, objects: Vec<ObjectInstance>) -> World {
    let scene = Arc::new(test_scene());
    let grid = Arc::new(build_occupancy_grid(&scene).unwrap());
    World::with_grid(scene, grid, agent, objects).unwrap()
}

fn rigid(id: &str, position: Vec2, height: f64) -> ObjectInstance {
    ObjectInstance {
        id: id.into(),
        category: Category::Phone,
        kind: ObjectKind::Rigid,
        position,
        height,
        orientation: 0.0,
        sound_clip: Some("phone_00".into()),
        emitting: true,
        fixture: None,
    }
}

fn sink_object(angle: f64) -> ObjectInstance {
    ObjectInstance {
        id: "src_sink".into(),
        category: Category::Sink,
        kind: ObjectKind::Articulated {
            joint_angle: angle,
            limits: [0.0, 1.57],
        },
        position: Vec2::new(1.25, 4.25),
        height: echo_core::world::SINK_HANDLE_HEIGHT,
        orientation: 0.0,
        sound_clip: Some("sink_00".into()),
        emitting: true,
        fixture: Some("sink".into()),
    }
}

fn door_object() -> ObjectInstance {
    ObjectInstance {
        id: "src_bell".into(),
        category: Category::Doorbell,
        kind: ObjectKind::Articulated {
            joint_angle: 0.0,
            limits: [0.0, 1.6],
        },
        position: Vec2::new(0.25, 1.75),
        height: echo_core::world::DOOR_HANDLE_HEIGHT,
        orientation: 0.0,
        sound_clip: Some("doorbell_00".into()),
        emitting: true,
        fixture: Some("door".into()),
    }
}

fn run(world: &mut World, skill: Skill, object: &str, place: Option<PlaceTarget>, actions: Vec<AgentAction>) -> SkillRun {
    run_with(world, skill, object, place, &mut Script(actions.into()), &SkillConfig::default())
}

fn run_with(
    world: &mut World,
    skill: Skill,
    object: &str,
    place: Option<PlaceTarget>,
    controller: &mut dyn Controller,
    config: &SkillConfig,
) -> SkillRun {
    let target = SkillTarget {
        skill,
        object_id: object.into(),
        nav_goal: world.object(object).map_or(Vec2::ZERO, |o| o.position),
        place_target: place,
    };
    let mut ctx = SkillContext { world, target, config };
    run_skill(&mut ctx, controller)
}

fn assert_outcome(o: &SkillOutcome, expect: Option<FailureReason>) {
    assert_eq!(o.success, expect.is_none(), "{o:?}");
    assert_eq!(o.failure_reason, expect, "{o:?}");
}

#[test]
fn navigate_threshold_table() {
    for (d, expect) in [
        (0.49, None),
        (0.50, None),
        (0.51, Some(FailureReason::StoppedOutOfRange)),
    ] {
        let agent = AgentState::new(Vec2::new(2.0, 2.0), 0.0);
        let mut world = world_with(agent, vec![rigid("goal", Vec2::new(2.0 + d, 2.0), 0.0)]);
        let r = run(&mut world, Skill::Nav, "goal", None, vec![AgentAction::Nav(NavAction::Stop)]);
        assert_outcome(&r.outcome, expect);
        assert_eq!(world.agent.base, Vec2::new(2.0, 2.0), "stop never moves the agent");
    }
}

#[test]
fn navigate_times_out() {
    let agent = AgentState::new(Vec2::new(2.0, 2.0), 0.0);
    let mut world = world_with(agent, vec![rigid("goal", Vec2::new(4.0, 4.0), 0.0)]);
    let turns = vec![AgentAction::Nav(NavAction::TurnLeft); 1000];
    let r = run(&mut world, Skill::Nav, "goal", None, turns);
    assert_outcome(&r.outcome, Some(FailureReason::Timeout));
    assert_eq!(r.outcome.steps, 500);
}

#[test]
fn pick_snap_threshold_table() {
    for (d, expect) in [(0.14, None), (0.15, None), (0.16, Some(FailureReason::NoGrasp))] {
        let agent = AgentState::new(Vec2::new(1.0, 1.0), 0.0);
        let ee = agent.end_effector();
        let obj = rigid("p", ee.position + Vec2::new(d, 0.0), ee.height);
        let mut world = world_with(agent, vec![obj]);
        let r = run(&mut world, Skill::Pick, "p", None, vec![grip(1.0)]);
        assert_outcome(&r.outcome, expect);
        if expect.is_none() {
            let o = world.object("p").unwrap();
            assert_eq!((o.position, o.height), (world.end_effector().position, world.end_effector().height));
        }
    }
}

fn reachable_pick_world() -> (World, ArmJoints) {
    let agent = AgentState::new(Vec2::new(2.75, 2.25), 0.0);
    let obj = rigid("p", Vec2::new(3.15, 2.25), 0.7);
    let q = inverse_kinematics(obj.position, obj.height, agent.base, agent.heading).unwrap();
    (world_with(agent, vec![obj]), q)
}

#[test]
fn pick_examples() {
    // Close at 0.10 m, then rest.
    let (mut world, q) = reachable_pick_world();
    let mut near = q;
    near[3] -= 0.10;
    let mut a = moves([0.0; 7], near);
    a.push(grip(1.0));
    a.extend(moves(near, [0.0; 7]));
    assert_outcome(&run(&mut world, Skill::Pick, "p", None, a).outcome, None);

    // Close at 0.20 m, then do everything right.
    let (mut world, q) = reachable_pick_world();
    let mut far = q;
    far[3] -= 0.20;
    let mut a = moves([0.0; 7], far);
    a.push(grip(1.0));
    a.extend(moves(far, q));
    a.push(grip(-1.0));
    a.push(grip(1.0));
    a.extend(moves(q, [0.0; 7]));
    assert_outcome(&run(&mut world, Skill::Pick, "p", None, a).outcome, Some(FailureReason::NoGrasp));

    // Grasp, finish with one joint 0.2 rad off rest.
    let (mut world, q) = reachable_pick_world();
    let mut off = [0.0; 7];
    off[5] = 0.2;
    let mut a = moves([0.0; 7], q);
    a.push(grip(1.0));
    a.extend(moves(q, off));
    assert_outcome(&run(&mut world, Skill::Pick, "p", None, a).outcome, Some(FailureReason::NoRetract));
}

fn holding_world() -> World {
    let (mut world, q) = reachable_pick_world();
    let mut a = moves([0.0; 7], q);
    a.push(grip(1.0));
    a.extend(moves(q, [0.0; 7]));
    assert!(run(&mut world, Skill::Pick, "p", None, a).outcome.success);
    world
}

fn place_target(p: Vec2) -> PlaceTarget {
    PlaceTarget {
        receptacle: "table".into(),
        position: p,
        height: 0.7,
    }
}

#[test]
fn place_examples() {
    let target = Vec2::new(3.25, 2.15);
    let base = Vec2::new(2.75, 2.25);

    // Release 0.10 m from the target, on the table.
    let mut world = holding_world();
    let q = inverse_kinematics(target + Vec2::new(0.0, 0.10), 0.7, base, 0.0).unwrap();
    let mut a = moves([0.0; 7], q);
    a.push(grip(-1.0));
    a.extend(moves(q, [0.0; 7]));
    let r = run(&mut world, Skill::Place, "p", Some(place_target(target)), a);
    assert_outcome(&r.outcome, None);
    let o = world.object("p").unwrap();
    assert_eq!(o.height, 0.7);
    assert!(world.agent.held_object.is_none());

    // Release over the floor.
    let mut world = holding_world();
    let q = inverse_kinematics(base + Vec2::new(0.0, 0.5), 0.7, base, 0.0).unwrap();
    let mut a = moves([0.0; 7], q);
    a.push(grip(-1.0));
    let r = run(&mut world, Skill::Place, "p", Some(place_target(target)), a);
    assert_outcome(&r.outcome, Some(FailureReason::DroppedObject));
    assert_eq!(world.object("p").unwrap().height, 0.0);

    // Never release.
    let mut world = holding_world();
    let r = run(&mut world, Skill::Place, "p", Some(place_target(target)), vec![AgentAction::Arm(ArmAction::hold()); 400]);
    assert_outcome(&r.outcome, Some(FailureReason::Timeout));
}

#[test]
fn place_threshold_is_configurable() {
    let target = Vec2::new(3.25, 2.15);
    let mut world = holding_world();
    let q = inverse_kinematics(target + Vec2::new(0.0, 0.10), 0.7, Vec2::new(2.75, 2.25), 0.0).unwrap();
    let mut a = moves([0.0; 7], q);
    a.push(grip(-1.0));
    a.extend(moves(q, [0.0; 7]));
    let cfg = SkillConfig {
        place_threshold_m: 0.0015,
        ..Default::default()
    };
    let r = run_with(&mut world, Skill::Place, "p", Some(place_target(target)), &mut Script(a.into()), &cfg);
    assert_outcome(&r.outcome, Some(FailureReason::DroppedObject));
}

fn door_world() -> (World, ArmJoints) {
    let agent = AgentState::new(Vec2::new(0.75, 1.75), std::f64::consts::PI);
    let world = world_with(agent.clone(), vec![door_object()]);
    let q = inverse_kinematics(Vec2::new(0.25, 1.75), 1.0, agent.base, agent.heading).unwrap();
    (world, q)
}

fn door_actions(q: ArmJoints, sweep_to: f64) -> Vec<AgentAction> {
    let mut a = moves([0.0; 7], q);
    a.push(grip(1.0));
    let mut swept = q;
    swept[0] += sweep_to;
    a.extend(moves(q, swept));
    a.push(grip(-1.0));
    a.extend(moves(swept, [0.0; 7]));
    a
}

#[test]
fn open_door_examples() {
    let (mut world, q) = door_world();
    let r = run(&mut world, Skill::OpenDoor, "src_bell", None, door_actions(q, 1.3));
    assert_outcome(&r.outcome, None);
    assert!((world.object("src_bell").unwrap().joint_angle().unwrap() - 1.3).abs() < 1e-9);
    assert!(world.attached.is_none());

    let (mut world, q) = door_world();
    let r = run(&mut world, Skill::OpenDoor, "src_bell", None, door_actions(q, 0.9));
    assert_outcome(&r.outcome, Some(FailureReason::JointShort));
}

#[test]
fn oracle_door_sweep_is_monotone() {
    let (mut world, _) = door_world();
    let mut oracle = ArmOracle::new(Skill::OpenDoor);
    let r = run_with(&mut world, Skill::OpenDoor, "src_bell", None, &mut oracle, &SkillConfig::default());
    assert_outcome(&r.outcome, None);
    let angles: Vec<f64> = r
        .trace
        .iter()
        .filter(|s| s.predicate.grasped)
        .map(|s| s.predicate.joint_angle.unwrap())
        .collect();
    assert!(angles.len() > 10);
    assert!(angles.windows(2).all(|w| w[1] >= w[0]));
    assert!(*angles.last().unwrap() >= 1.22);
}

fn sink_world(angle: f64) -> (World, ArmJoints) {
    let agent = AgentState::new(Vec2::new(1.25, 3.25), std::f64::consts::FRAC_PI_2);
    let world = world_with(agent.clone(), vec![sink_object(angle)]);
    let pivot = world.scene.sinks[0].handle_pivot;
    let q = inverse_kinematics(pivot, echo_core::world::SINK_HANDLE_HEIGHT, agent.base, agent.heading).unwrap();
    (world, q)
}

#[test]
fn close_sink_tolerance_table() {
    for (angle, expect) in [
        (0.19, None),
        (0.20, None),
        (0.21, Some(FailureReason::AngleOutOfTolerance)),
    ] {
        let (mut world, q) = sink_world(angle);
        let mut a = moves([0.0; 7], q);
        a.push(grip(1.0));
        a.push(grip(-1.0));
        a.extend(moves(q, [0.0; 7]));
        let r = run(&mut world, Skill::CloseSink, "src_sink", None, a);
        assert_outcome(&r.outcome, expect);
        assert_eq!(world.object("src_sink").unwrap().emitting, expect.is_some());
    }
}

#[test]
fn close_sink_examples() {
    // Drive from 1.0 to 0.15 rad.
    let (mut world, q) = sink_world(1.0);
    let mut a = moves([0.0; 7], q);
    a.push(grip(1.0));
    let mut turned = q;
    turned[0] -= 0.85;
    a.extend(moves(q, turned));
    a.push(grip(-1.0));
    a.extend(moves(turned, [0.0; 7]));
    assert_outcome(&run(&mut world, Skill::CloseSink, "src_sink", None, a).outcome, None);

    // Stop at 0.25 rad.
    let (mut world, q) = sink_world(1.0);
    let mut a = moves([0.0; 7], q);
    a.push(grip(1.0));
    let mut turned = q;
    turned[0] -= 0.75;
    a.extend(moves(q, turned));
    a.push(grip(-1.0));
    a.extend(moves(turned, [0.0; 7]));
    let r = run(&mut world, Skill::CloseSink, "src_sink", None, a);
    assert_outcome(&r.outcome, Some(FailureReason::AngleOutOfTolerance));

    // Turning the wrong way opens the faucet further.
    let (mut world, q) = sink_world(0.6);
    let mut a = moves([0.0; 7], q);
    a.push(grip(1.0));
    let mut turned = q;
    turned[0] += 0.5;
    a.extend(moves(q, turned));
    a.push(grip(-1.0));
    a.extend(moves(turned, [0.0; 7]));
    let r = run(&mut world, Skill::CloseSink, "src_sink", None, a);
    assert!(world.object("src_sink").unwrap().joint_angle().unwrap() > 0.6);
    assert_outcome(&r.outcome, Some(FailureReason::AngleOutOfTolerance));
    assert!(world.object("src_sink").unwrap().emitting);
}

fn episodes(task: Task, n: usize, seed: u64) -> Vec<Episode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            generate_episode(task, pool(), bank(), Split::Test, &format!("e{i}"), &GenerationConfig::default(), &mut rng)
                .unwrap()
        })
        .collect()
}

fn world_for(e: &Episode) -> World {
    let (scene, grid) = pool().find(&e.scene_id).unwrap();
    e.build_world(scene.clone(), grid.clone()).unwrap()
}

#[test]
fn oracle_completes_every_validated_episode() {
    for task in Task::ALL {
        for e in episodes(task, 40, 21) {
            let mut world = world_for(&e);
            let r = run_chain(&mut world, &e, &e.expected_plan(), &mut Controllers::oracle(), &SkillConfig::default());
            assert!(r.overall, "{} {:?}", e.episode_id, r.stages);
            assert_eq!(r.stages.len(), e.sources.len());
            assert!(world.emitting_sources().next().is_none());
        }
    }
}

/// Wraps the oracle and checks that a held object sits exactly on the end-effector.
struct RigidityCheck(ArmOracle, usize);

impl Controller for RigidityCheck {
    fn reset(&mut self, w: &World, t: &SkillTarget) {
        self.0.reset(w, t)
    }
    fn act(&mut self, w: &World, t: &SkillTarget) -> Option<AgentAction> {
        if let Some(id) = &w.agent.held_object {
            let o = w.object(id).unwrap();
            let ee = w.end_effector();
            assert_eq!((o.position, o.height), (ee.position, ee.height));
            self.1 += 1;
        }
        self.0.act(w, t)
    }
}

#[test]
fn held_object_tracks_end_effector() {
    let e = &episodes(Task::SonicStow, 1, 22)[0];
    let mut world = world_for(e);
    let mut c = Controllers::oracle();
    c.place = Box::new(RigidityCheck(ArmOracle::new(Skill::Place), 0));
    let r = run_chain(&mut world, e, &e.expected_plan(), &mut c, &SkillConfig::default());
    assert!(r.overall);
}

#[test]
fn chain_aborts_at_first_failure() {
    let e = &episodes(Task::SonicStow, 1, 23)[0];
    let mut world = world_for(e);
    let cfg = SkillConfig {
        nav_budget: 1,
        ..Default::default()
    };
    let r = run_chain(&mut world, e, &e.expected_plan(), &mut Controllers::oracle(), &cfg);
    assert!(!r.overall);
    let outcomes: Vec<_> = r.outcomes().collect();
    assert_eq!(outcomes.len(), 1);
    assert_eq!(outcomes[0].failure_reason, Some(FailureReason::Timeout));
    assert!(world.object(&e.sources[0].object.id).unwrap().emitting);
}

#[test]
fn mismatched_skill_fails() {
    let e = episodes(Task::SonicInteract, 20, 24)
        .into_iter()
        .find(|e| e.sources[0].category() == Category::Doorbell)
        .unwrap();
    let mut world = world_for(&e);
    let plan = SkillChain::Single(vec![Skill::Nav, Skill::CloseSink]);
    let r = run_chain(&mut world, &e, &plan, &mut Controllers::oracle(), &SkillConfig::default());
    assert!(!r.overall);
    assert_eq!(r.stages[0].outcomes[1].failure_reason, Some(FailureReason::AngleOutOfTolerance));
}

#[test]
fn first_source_falls_silent_in_bisonic() {
    let listener = Listener::new(bank().clone());
    let e = episodes(Task::BiSonic, 60, 25)
        .into_iter()
        .find(|e| e.sources[e.priority_order[0]].category() == Category::Sink)
        .expect("a sink-first episode");
    let first = e.sources[e.priority_order[0]].object.id.clone();
    let second = e.sources[e.priority_order[1]].object.id.clone();
    let mut world = world_for(&e);
    let plan = e.expected_plan();
    let SkillChain::Dual { first_sound, .. } = &plan else { panic!() };
    let r = run_chain(&mut world, &e, &SkillChain::Single(first_sound.clone()), &mut Controllers::oracle(), &SkillConfig::default());
    assert!(r.overall);
    assert!(!world.object(&first).unwrap().emitting);
    assert!(world.object(&second).unwrap().emitting);

    let mut with_sink = world.clone();
    with_sink.object_mut(&first).unwrap().emitting = true;
    for t in 0..3 {
        let heard = listener.render(&world, t).unwrap();
        let excluded = listener.render_excluding(&with_sink, t, &[&first]).unwrap();
        assert_eq!(heard, excluded);
        assert_ne!(heard, listener.render(&with_sink, t).unwrap());
    }
}

#[test]
fn trace_is_json_lines() {
    let e = &episodes(Task::SonicInteract, 1, 26)[0];
    let mut world = world_for(e);
    let r = run_chain(&mut world, e, &e.expected_plan(), &mut Controllers::oracle(), &SkillConfig::default());
    let steps: usize = r.outcomes().map(|o| o.steps).sum();
    assert_eq!(r.trace.len(), steps);
    let mut buf = Vec::new();
    write_trace(&mut buf, &r.trace).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), steps);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["skill"], "nav");
}
