mod support;

use base64::Engine;
use echo_core::acoustics::BinauralFrame;
use echo_core::episodes::{generate_episode, generate_scene_pool, ground_truth_chain, Episode, GenerationConfig, ScenePool, Task};
use echo_core::perception::{CategoryClassifier, Listener, RangeScan};
use echo_core::planner::{
    build_request, parse_plan_document, plan_oracle, plan_remote, plan_rule_based, strip_fences, validate_chain,
    Backend, PlannerError, PlannerObservation, PromptSet, RemoteConfig, Skill, SkillChain, BISONIC_SYSTEM,
    SINGLE_SYSTEM,
};
use echo_core::soundbank::{synthesize_bank, SoundBank, Split};
use echo_core::world::Category;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::sync::{Arc, OnceLock};
use std::time::Duration;
use support::{serve, Canned};

fn bank() -> &'static Arc<SoundBank> {
    static BANK: OnceLock<Arc<SoundBank>> = OnceLock::new();
    BANK.get_or_init(|| Arc::new(synthesize_bank(7)))
}

fn classifier() -> &'static CategoryClassifier {
    static C: OnceLock<CategoryClassifier> = OnceLock::new();
    C.get_or_init(|| CategoryClassifier::fit(bank()))
}

fn pool() -> &'static ScenePool {
    static POOL: OnceLock<ScenePool> = OnceLock::new();
    POOL.get_or_init(|| ScenePool::new(generate_scene_pool(13, 12)).unwrap())
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

fn observe(e: &Episode, listener: &Listener) -> PlannerObservation {
    let (scene, grid) = pool().find(&e.scene_id).unwrap();
    let world = e.build_world(scene.clone(), grid.clone()).unwrap();
    PlannerObservation::capture(e, &world, listener).unwrap()
}

fn silent_obs(hint: Option<Category>) -> PlannerObservation {
    PlannerObservation {
        audio: BinauralFrame::silent(16000),
        scan: RangeScan {
            ranges: vec![1.0; 8],
            max_range: 5.0,
            fov: 1.5,
        },
        known_first_source: hint,
    }
}

#[test]
fn logic_mapping_table() {
    use Skill::*;
    let table = [
        (Category::Alarm, vec![Nav, Pick, Place]),
        (Category::Phone, vec![Nav, Pick, Place]),
        (Category::Furby, vec![Nav, Pick, Place]),
        (Category::Doorbell, vec![Nav, OpenDoor]),
        (Category::Sink, vec![Nav, CloseSink]),
    ];
    for (c, chain) in table {
        assert_eq!(ground_truth_chain(c).unwrap(), chain, "{c}");
    }
    assert!(SINGLE_SYSTEM.contains(r#"REQUIRED PLAN: ["nav", "pick", "place"]"#));
    assert!(SINGLE_SYSTEM.contains(r#"Doorbell. REQUIRED PLAN: ["nav", "open_door"]"#));
    assert!(SINGLE_SYSTEM.contains(r#"Water Running. REQUIRED PLAN: ["nav", "close_sink"]"#));
    assert!(BISONIC_SYSTEM.contains(r#""Running-Water" -> REQUIRED PLAN: ["nav", "close_sink"]"#));
}

#[test]
fn validate_chain_cases() {
    let bad = |v: serde_json::Value| match validate_chain(&v) {
        Err(PlannerError::PlanInvalid(tok)) => tok,
        other => panic!("{v} gave {other:?}"),
    };
    assert_eq!(bad(json!([])), "empty");
    assert_eq!(bad(json!(["nav", "grab"])), "grab");
    assert_eq!(bad(json!({"first_sound": ["nav"], "third_sound": ["nav"]})), "third_sound");
    assert_eq!(bad(json!({"first_sound": ["nav"]})), "missing second_sound");
    assert_eq!(bad(json!({"first_sound": [], "second_sound": ["nav"]})), "empty");
    assert_eq!(
        validate_chain(&json!(["nav", "close_sink"])).unwrap(),
        SkillChain::Single(vec![Skill::Nav, Skill::CloseSink])
    );
    assert!(parse_plan_document(&json!({"plan": ["nav"], "extra": 1})).is_err());
    assert!(parse_plan_document(&json!({"steps": ["nav"]})).is_err());
}

#[test]
fn oracle_returns_ground_truth() {
    for e in episodes(Task::BiSonic, 10, 1).iter().chain(&episodes(Task::SonicStow, 5, 2)) {
        let v = plan_oracle(e);
        assert_eq!(v.backend, Backend::Oracle);
        assert_eq!(v.planning_correct, Some(true));
        assert_eq!(v.chain, e.expected_plan());
    }
    let e = episodes(Task::BiSonic, 80, 3)
        .into_iter()
        .find(|e| {
            e.sources[e.priority_order[0]].category() == Category::Doorbell
                && e.sources[e.priority_order[1]].category() == Category::Sink
        })
        .unwrap();
    assert_eq!(
        plan_oracle(&e).chain.to_plan_value(),
        json!({"first_sound": ["nav", "open_door"], "second_sound": ["nav", "close_sink"]})
    );
}

#[test]
fn rule_based_single_source_accuracy() {
    let listener = Listener::new(bank().clone());
    let mut correct = 0;
    let mut total = 0;
    for task in [Task::SonicStow, Task::SonicInteract] {
        for e in episodes(task, 100, 4) {
            let v = plan_rule_based(&observe(&e, &listener), classifier()).unwrap();
            correct += (v.chain == e.expected_plan()) as usize;
            total += 1;
        }
    }
    let acc = correct as f64 / total as f64;
    assert!(acc >= 0.95, "accuracy {acc}");
}

#[test]
fn rule_based_bisonic_uses_hint() {
    let listener = Listener::new(bank().clone());
    let eps = episodes(Task::BiSonic, 60, 5);
    let mut correct = 0;
    for e in &eps {
        let obs = observe(e, &listener);
        assert_eq!(obs.known_first_source, Some(e.sources[e.priority_order[0]].category()));
        let v = plan_rule_based(&obs, classifier()).unwrap();
        let SkillChain::Dual { first_sound, .. } = &v.chain else { panic!() };
        assert_eq!(first_sound, &e.ground_truth_chains[e.priority_order[0]]);
        correct += (v.chain == e.expected_plan()) as usize;
    }
    assert!(correct as f64 / eps.len() as f64 >= 0.8, "{correct}/{}", eps.len());
}

#[test]
fn rule_based_silence_falls_back() {
    let v = plan_rule_based(&silent_obs(None), classifier()).unwrap();
    assert!(v.low_confidence);
    assert_eq!(v.chain, SkillChain::Single(vec![Skill::Nav, Skill::Pick, Skill::Place]));
    let unfitted = CategoryClassifier::default();
    assert!(matches!(
        plan_rule_based(&silent_obs(None), &unfitted),
        Err(PlannerError::Perception(_))
    ));
}

#[test]
fn fence_stripping() {
    assert_eq!(strip_fences("```json\n{\"plan\": [\"nav\"]}\n```"), "{\"plan\": [\"nav\"]}");
    assert_eq!(strip_fences("```\n{}\n```\n"), "{}");
    assert_eq!(strip_fences("  {\"a\":1} "), "{\"a\":1}");
}

#[test]
fn prompt_hint_is_filled() {
    let p = PromptSet::default();
    assert_eq!(p.system(None), SINGLE_SYSTEM);
    let s = p.system(Some(Category::Sink));
    assert!(!s.contains("{obj_1}"));
    assert_eq!(s.matches("\"Running-Water\"").count(), 4);
    assert!(p.user.starts_with("Input observation provided."));
}

#[test]
fn request_carries_only_the_observation() {
    let obs = silent_obs(Some(Category::Alarm));
    let body = build_request(&obs, &PromptSet::default(), "m").unwrap();
    let msgs = body["messages"].as_array().unwrap();
    assert_eq!(msgs.len(), 2);
    assert!(msgs[0]["content"].as_str().unwrap().contains("CONFIRMED to be: \"Mechanical_Alarm\""));
    let parts = msgs[1]["parts"].as_array().unwrap();
    let decode = |i: usize| {
        base64::engine::general_purpose::STANDARD
            .decode(parts[i]["data"].as_str().unwrap())
            .unwrap()
    };
    assert_eq!(&decode(0)[1..4], b"PNG");
    assert_eq!(&decode(1)[..4], b"RIFF");
    assert_eq!(parts[2]["text"], PromptSet::default().user);
}

fn remote(url: &str) -> RemoteConfig {
    RemoteConfig {
        endpoint: url.to_string(),
        timeout_s: 0.5,
        ..Default::default()
    }
}

#[test]
fn remote_contract() {
    let obs = silent_obs(None);
    let prompts = PromptSet::default();
    let stub = serve(vec![
        Canned::Text(r#"{"plan": ["nav","open_door"]}"#.into()),
        Canned::Text("```json\n{\"plan\": [\"nav\", \"close_sink\"]}\n```".into()),
        Canned::Text(r#"{"plan": ["nav","grab"]}"#.into()),
        Canned::Stall(Duration::from_secs(3)),
    ]);
    let cfg = remote(&stub.url);
    let v = plan_remote(&obs, &cfg, &prompts).unwrap();
    assert_eq!(v.chain, SkillChain::Single(vec![Skill::Nav, Skill::OpenDoor]));
    assert_eq!(v.backend, Backend::Remote);
    let v = plan_remote(&obs, &cfg, &prompts).unwrap();
    assert_eq!(v.chain, SkillChain::Single(vec![Skill::Nav, Skill::CloseSink]));
    assert!(matches!(plan_remote(&obs, &cfg, &prompts), Err(PlannerError::PlanInvalid(t)) if t == "grab"));
    assert!(matches!(plan_remote(&obs, &cfg, &prompts), Err(PlannerError::Transport(_))));
    assert_eq!(stub.bodies.lock().unwrap().len(), 4);
}

#[test]
fn remote_retries_unparseable_replies() {
    let obs = silent_obs(None);
    let prompts = PromptSet::default();
    let stub = serve(vec![
        Canned::Text("I think you should navigate".into()),
        Canned::Text(r#"{"plan": ["nav","pick","place"]}"#.into()),
        Canned::Text("nope".into()),
        Canned::Text("still no".into()),
        Canned::Text("{plan".into()),
        Canned::Status(500),
    ]);
    let dir = tempfile::tempdir().unwrap();
    let cfg = RemoteConfig {
        transcript: Some(dir.path().join("t.jsonl")),
        ..remote(&stub.url)
    };
    let v = plan_remote(&obs, &cfg, &prompts).unwrap();
    assert_eq!(v.chain, SkillChain::Single(vec![Skill::Nav, Skill::Pick, Skill::Place]));
    assert!(matches!(plan_remote(&obs, &cfg, &prompts), Err(PlannerError::PlanParse(t)) if t == "{plan"));
    assert!(matches!(plan_remote(&obs, &cfg, &prompts), Err(PlannerError::Transport(_))));
    let log = std::fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 6);
}
