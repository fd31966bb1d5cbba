use echo_core::episodes::{
    generate_dataset, generate_dataset_with, generate_episode, generate_scene_pool, ground_truth_chain, load_dataset,
    nav_goal, read_episodes, validate_episode, write_episodes, Episode, GenerationConfig, Preset, ScenePool, Task,
    ValidationFailure, FRONTAL_DEPTH, NAV_RADIUS,
};
use echo_core::planner::Skill;
use echo_core::soundbank::{synthesize_bank, SoundBank, Split};
use echo_core::world::{build_occupancy_grid, Category, Receptacle, Scene, Vec2, Wall};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{HashSet, VecDeque};
use std::sync::OnceLock;

fn bank() -> &'static SoundBank {
    static BANK: OnceLock<SoundBank> = OnceLock::new();
    BANK.get_or_init(|| synthesize_bank(7))
}

fn pool() -> &'static ScenePool {
    static POOL: OnceLock<ScenePool> = OnceLock::new();
    POOL.get_or_init(|| ScenePool::new(generate_scene_pool(3, 16)).unwrap())
}

fn draw(task: Task, n: usize, seed: u64) -> Vec<Episode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let split = if i % 3 == 0 { Split::Test } else { Split::Train };
            generate_episode(task, pool(), bank(), split, &format!("e{i}"), &GenerationConfig::default(), &mut rng)
                .unwrap()
        })
        .collect()
}

fn scene_of(e: &Episode) -> Scene {
    (**pool().find(&e.scene_id).unwrap().0).clone()
}

/// Breadth-first flood over free cells from the start; reachable when any
/// visited cell center lies within the navigation radius of the goal.
fn bfs_reachable(scene: &Scene, start: Vec2, goal: Vec2) -> bool {
    let grid = build_occupancy_grid(scene).unwrap();
    let cs = scene.cell_size;
    let cell = |p: Vec2| (((p.x - scene.bounds.min.x) / cs).floor() as i64, ((p.y - scene.bounds.min.y) / cs).floor() as i64);
    let free = |c: (i64, i64)| {
        c.0 >= 0
            && c.1 >= 0
            && (c.0 as usize) < grid.cols
            && (c.1 as usize) < grid.rows
            && grid.is_free((c.0 as usize, c.1 as usize))
    };
    let s = cell(start);
    if !free(s) {
        return false;
    }
    let mut seen = HashSet::from([s]);
    let mut queue = VecDeque::from([s]);
    while let Some(c) = queue.pop_front() {
        let center = Vec2::new(
            scene.bounds.min.x + (c.0 as f64 + 0.5) * cs,
            scene.bounds.min.y + (c.1 as f64 + 0.5) * cs,
        );
        if center.distance(goal) <= NAV_RADIUS + 1e-9 {
            return true;
        }
        for d in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let n = (c.0 + d.0, c.1 + d.1);
            if free(n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    false
}

#[test]
fn interact_sources_are_doorbells_or_sinks() {
    let episodes = draw(Task::SonicInteract, 1000, 1);
    let mut seen = HashSet::new();
    for e in &episodes {
        assert_eq!(e.sources.len(), 1);
        assert!(e.distractors.is_empty());
        let c = e.sources[0].category();
        assert!(matches!(c, Category::Doorbell | Category::Sink), "{c:?}");
        seen.insert(c);
    }
    assert_eq!(seen.len(), 2);
}

#[test]
fn stow_sources_rest_on_receptacles() {
    for e in draw(Task::SonicStow, 200, 2) {
        let scene = scene_of(&e);
        let src = &e.sources[0];
        assert!(matches!(src.category(), Category::Phone | Category::Alarm | Category::Furby));
        assert!(src.object.height > 0.0);
        let rec = scene.receptacle_at(src.object.position).unwrap();
        assert_eq!(rec.height, src.object.height);
        let target = src.place_target.as_ref().unwrap();
        assert!(scene.receptacle_at(target.position).is_some());
        assert_eq!(e.distractors.len(), 2);
        assert!(e.distractors.iter().all(|d| d.category == Category::Distractor && !d.emitting));
    }
}

#[test]
fn clips_come_from_the_episode_split() {
    for task in Task::ALL {
        for e in draw(task, 60, 3) {
            for s in &e.sources {
                let clip = bank().get(s.clip_id()).unwrap();
                assert_eq!(clip.split, e.split);
                assert_eq!(clip.category, s.category());
            }
        }
    }
}

#[test]
fn bisonic_sources_are_distinct_and_ordered() {
    let episodes = draw(Task::BiSonic, 300, 4);
    let mut pairs = HashSet::new();
    for e in &episodes {
        assert_eq!(e.sources.len(), 2);
        assert_ne!(e.sources[0].category(), e.sources[1].category());
        let mut order = e.priority_order.clone();
        order.sort();
        assert_eq!(order, vec![0, 1]);
        pairs.insert((e.sources[0].category(), e.sources[1].category()));
        let plan = e.expected_plan().to_plan_value();
        let first = &e.ground_truth_chains[e.priority_order[0]];
        let encoded: Vec<Skill> = serde_json::from_value(plan["first_sound"].clone()).unwrap();
        assert_eq!(&encoded, first);
    }
    assert!(pairs.len() >= 15, "only {} ordered pairs", pairs.len());
}

#[test]
fn ground_truth_chains_per_category() {
    use Skill::*;
    for c in [Category::Alarm, Category::Phone, Category::Furby] {
        assert_eq!(ground_truth_chain(c).unwrap(), vec![Nav, Pick, Place]);
    }
    assert_eq!(ground_truth_chain(Category::Doorbell).unwrap(), vec![Nav, OpenDoor]);
    assert_eq!(ground_truth_chain(Category::Sink).unwrap(), vec![Nav, CloseSink]);
    assert!(ground_truth_chain(Category::Distractor).is_err());
}

#[test]
fn generation_is_deterministic() {
    let a = generate_dataset_with(Task::BiSonic, (12, 6), Preset::Desk, 9, bank(), &GenerationConfig::default()).unwrap();
    let b = generate_dataset_with(Task::BiSonic, (12, 6), Preset::Desk, 9, bank(), &GenerationConfig::default()).unwrap();
    assert_eq!(a.train, b.train);
    assert_eq!(a.test, b.test);
    let c = generate_dataset_with(Task::BiSonic, (12, 6), Preset::Desk, 10, bank(), &GenerationConfig::default()).unwrap();
    assert_ne!(a.train, c.train);
}

#[test]
fn enclosed_start_is_unreachable() {
    let e = &draw(Task::SonicStow, 1, 5)[0];
    let mut scene = scene_of(e);
    let s = e.agent_start.position;
    let cs = scene.cell_size;
    let c = [
        Vec2::new(s.x - cs, s.y - cs),
        Vec2::new(s.x + cs, s.y - cs),
        Vec2::new(s.x + cs, s.y + cs),
        Vec2::new(s.x - cs, s.y + cs),
    ];
    for i in 0..4 {
        scene.walls.push(Wall::new(c[i], c[(i + 1) % 4], "wall"));
    }
    let report = validate_episode(e, &scene);
    assert!(report.failures.contains(&ValidationFailure::Unreachable { source: 0 }), "{report:?}");
    assert!(validate_episode(e, &scene_of(e)).passed());
}

#[test]
fn blocked_frontal_region_is_rejected() {
    let episodes = draw(Task::SonicInteract, 40, 6);
    let sink_ep = episodes.iter().find(|e| e.sources[0].category() == Category::Sink).unwrap();
    let mut scene = scene_of(sink_ep);
    let sink = scene
        .sinks
        .iter()
        .find(|s| Some(&s.id) == sink_ep.sources[0].object.fixture.as_ref())
        .unwrap()
        .clone();
    let region = sink.frontal_region(FRONTAL_DEPTH);
    let far = Vec2::new(region.center().x, region.center().y);
    scene.receptacles.push(Receptacle {
        id: "blocker".into(),
        top: echo_core::world::Rect::centered(far, 0.1, 0.1),
        height: 0.5,
    });
    let report = validate_episode(sink_ep, &scene);
    assert!(report.failures.contains(&ValidationFailure::NoFrontalAccess { source: 0 }), "{report:?}");

    let door_ep = episodes.iter().find(|e| e.sources[0].category() == Category::Doorbell).unwrap();
    let mut scene = scene_of(door_ep);
    let door = scene.find_door(door_ep.sources[0].object.fixture.as_deref().unwrap()).unwrap().clone();
    let n = door.interaction_normal();
    let mid = (door.hinge + door.leaf_end) * 0.5 + n * (FRONTAL_DEPTH / 2.0);
    scene.walls.push(Wall::new(mid - n * 0.1, mid + n * 0.1, "wall"));
    let report = validate_episode(door_ep, &scene);
    assert!(report.failures.contains(&ValidationFailure::NoFrontalAccess { source: 0 }), "{report:?}");
}

#[test]
fn astar_reachability_agrees_with_flood_fill() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let episodes: Vec<Episode> = [Task::SonicStow, Task::SonicInteract, Task::BiSonic]
        .iter()
        .flat_map(|&t| draw(t, 17, 8))
        .take(50)
        .collect();
    assert_eq!(episodes.len(), 50);
    let mut unreachable = 0;
    for e in &episodes {
        let mut scene = scene_of(e);
        // Random interior wall segments on cell-center lines.
        let cs = scene.cell_size;
        let cols = (scene.bounds.width() / cs) as i64;
        let rows = (scene.bounds.height() / cs) as i64;
        for _ in 0..rng.gen_range(0..4) {
            let line = |i: i64| (i as f64 + 0.5) * cs;
            if rng.gen_bool(0.5) {
                let x = line(rng.gen_range(1..cols - 1));
                scene.walls.push(Wall::new(Vec2::new(x, line(0)), Vec2::new(x, line(rows - 1)), "wall"));
            } else {
                let y = line(rng.gen_range(1..rows - 1));
                scene.walls.push(Wall::new(Vec2::new(line(0), y), Vec2::new(line(cols - 1), y), "wall"));
            }
        }
        let report = validate_episode(e, &scene);
        if report.failures.contains(&ValidationFailure::StartBlocked) {
            continue;
        }
        for (i, s) in e.sources.iter().enumerate() {
            let oracle = bfs_reachable(&scene, e.agent_start.position, nav_goal(&scene, &s.object));
            let flagged = report.failures.contains(&ValidationFailure::Unreachable { source: i });
            assert_eq!(oracle, !flagged, "{} source {i}", e.episode_id);
            unreachable += flagged as usize;
        }
    }
    assert!(unreachable > 0);
}

#[test]
fn generated_episodes_validate() {
    for task in Task::ALL {
        for e in draw(task, 50, 9) {
            let scene = scene_of(&e);
            assert!(validate_episode(&e, &scene).passed());
            for s in &e.sources {
                assert!(bfs_reachable(&scene, e.agent_start.position, nav_goal(&scene, &s.object)));
            }
        }
    }
}

#[test]
fn jsonl_round_trip() {
    let episodes = draw(Task::BiSonic, 20, 10);
    let mut buf = Vec::new();
    write_episodes(&mut buf, &episodes).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 20);
    let back = read_episodes(buf.as_slice()).unwrap();
    assert_eq!(back, episodes);
}

#[test]
fn dataset_persists_and_revalidates() {
    let data = generate_dataset(Task::SonicStow, Preset::Desk, 11, bank()).unwrap();
    assert_eq!((data.train.len(), data.test.len()), (75, 25));
    assert!(data.train.iter().all(|e| e.split == Split::Train));
    assert!(data.test.iter().all(|e| e.split == Split::Test));
    let dir = tempfile::tempdir().unwrap();
    data.save(dir.path()).unwrap();
    let manifest = dir.path().join("stow_manifest.json");
    let loaded = load_dataset(&manifest).unwrap();
    assert_eq!(loaded.train, data.train);
    assert_eq!(loaded.test, data.test);
    assert_eq!(loaded.manifest, data.manifest);

    // Moving the start into the boundary wall must fail re-validation.
    let mut broken = data.test.clone();
    broken[0].agent_start.position = Vec2::new(0.25, 0.25);
    write_episodes(std::fs::File::create(dir.path().join("stow_test.jsonl")).unwrap(), &broken).unwrap();
    let err = load_dataset(&manifest).unwrap_err();
    assert!(err.to_string().contains("failed validation"), "{err}");
}

#[test]
fn preset_counts() {
    assert_eq!(Preset::Paper.counts(Task::SonicStow), (660, 222));
    assert_eq!(Preset::Paper.counts(Task::SonicInteract), (660, 222));
    assert_eq!(Preset::Paper.counts(Task::BiSonic), (660, 355));
    for t in Task::ALL {
        let (a, b) = Preset::Desk.counts(t);
        assert_eq!(a + b, 100);
    }
}
