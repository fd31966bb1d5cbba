use echo_core::acoustics::{
    compute_rir, convolve, render_binaural, render_binaural_raw, rt60_estimate, trace_paths, ActiveSource,
    AcousticsError, EarGeometry, ImpulseResponse, RirCache, RirConfig, Waveform, SAMPLE_RATE, SPEED_OF_SOUND,
};
use echo_core::world::{AgentState, MaterialProperties, Scene, Vec2, Wall};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn free_field(w: f64, h: f64) -> Scene {
    Scene::empty("free", w, h, 0.25)
}

fn room(absorption: f64) -> Scene {
    Scene::rectangular_room("room", 4.0, 3.0, 0.25, MaterialProperties::uniform(absorption, 0.0))
}

fn expected_delay(d: f64) -> usize {
    (d / SPEED_OF_SOUND * SAMPLE_RATE as f64).round() as usize
}

fn schoolbook(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len() + h.len() - 1];
    for n in 0..y.len() {
        let mut acc = 0.0;
        for k in 0..h.len() {
            if k <= n && n - k < x.len() {
                acc += x[n - k] * h[k];
            }
        }
        y[n] = acc;
    }
    y
}

#[test]
fn free_field_tap_at_analytic_delay() {
    let scene = free_field(6.0, 2.0);
    let rir = compute_rir(&scene, Vec2::new(1.0, 1.0), Vec2::new(4.43, 1.0), &RirConfig::default()).unwrap();
    let taps = rir.nonzero_taps();
    assert_eq!(taps.len(), 1);
    assert_eq!(taps[0].0, 160);
    assert!((taps[0].1 - 1.0 / 3.43).abs() < 1e-12);
}

#[test]
fn order_zero_keeps_only_direct_path() {
    let scene = room(0.3);
    let cfg = RirConfig { max_order: 0, ..Default::default() };
    let rir = compute_rir(&scene, Vec2::new(1.0, 1.0), Vec2::new(3.0, 2.0), &cfg).unwrap();
    let taps = rir.nonzero_taps();
    assert_eq!(taps.len(), 1);
    assert_eq!(taps[0].0, expected_delay(5f64.sqrt()));
}

#[test]
fn first_order_images_in_rectangular_room() {
    let scene = room(0.3);
    let cfg = RirConfig { max_order: 1, ..Default::default() };
    let src = Vec2::new(1.0, 1.0);
    let ear = Vec2::new(3.0, 2.0);
    let paths = trace_paths(&scene, src, ear, &cfg).unwrap();
    // Mirror images across x=0, x=4, y=0, y=3.
    let images = [
        Vec2::new(-1.0, 1.0),
        Vec2::new(7.0, 1.0),
        Vec2::new(1.0, -1.0),
        Vec2::new(1.0, 5.0),
    ];
    let mut expected: Vec<usize> = images.iter().map(|p| expected_delay(p.distance(ear))).collect();
    expected.push(expected_delay(src.distance(ear)));
    expected.sort();
    let mut got: Vec<usize> = paths.iter().map(|p| p.delay).collect();
    got.sort();
    assert_eq!(got, expected);
    let refl = (1.0f64 - 0.3).sqrt();
    for p in paths.iter().filter(|p| p.reflections.len() == 1) {
        assert!((p.amplitude - refl / p.length).abs() < 1e-12);
    }
}

#[test]
fn out_of_bounds_endpoint_rejected() {
    let scene = room(0.3);
    let r = compute_rir(&scene, Vec2::new(5.0, 1.0), Vec2::new(1.0, 1.0), &RirConfig::default());
    assert!(matches!(r, Err(AcousticsError::OutOfBounds(_))));
}

fn partitioned(transmission: f64) -> Scene {
    let mut s = free_field(6.0, 4.0);
    s.materials.insert(
        "partition".into(),
        MaterialProperties::uniform(1.0 - transmission, transmission),
    );
    s.walls.push(Wall::new(Vec2::new(3.0, 0.0), Vec2::new(3.0, 4.0), "partition"));
    s
}

#[test]
fn opaque_wall_removes_direct_path() {
    let scene = partitioned(0.0);
    let rir = compute_rir(&scene, Vec2::new(1.0, 2.0), Vec2::new(5.0, 2.0), &RirConfig::default()).unwrap();
    assert_eq!(rir.energy(), 0.0);
}

#[test]
fn transmitting_wall_scales_direct_path() {
    let scene = partitioned(0.25);
    let rir = compute_rir(&scene, Vec2::new(1.0, 2.0), Vec2::new(5.0, 2.0), &RirConfig::default()).unwrap();
    let taps = rir.nonzero_taps();
    assert_eq!(taps.len(), 1);
    assert_eq!(taps[0].0, expected_delay(4.0));
    assert!((taps[0].1 - 0.5 / 4.0).abs() < 1e-12);
}

#[test]
fn first_arrival_never_early() {
    let scene = room(0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let s = Vec2::new(rng.gen_range(0.1..3.9), rng.gen_range(0.1..2.9));
        let e = Vec2::new(rng.gen_range(0.1..3.9), rng.gen_range(0.1..2.9));
        let rir = compute_rir(&scene, s, e, &RirConfig::default()).unwrap();
        let first = rir.first_nonzero().unwrap();
        assert!(first + 1 >= expected_delay(s.distance(e)));
    }
}

fn tap_multiset(rir: &ImpulseResponse) -> Vec<(usize, f64)> {
    rir.nonzero_taps()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn free_field_delay_is_exact(sx in 0.0f64..10.0, sy in 0.0f64..10.0, ex in 0.0f64..10.0, ey in 0.0f64..10.0) {
        let scene = free_field(10.0, 10.0);
        let (s, e) = (Vec2::new(sx, sy), Vec2::new(ex, ey));
        let cfg = RirConfig { max_length: 1.0, ..Default::default() };
        let rir = compute_rir(&scene, s, e, &cfg).unwrap();
        prop_assert_eq!(rir.first_nonzero(), Some(expected_delay(s.distance(e))));
    }

    #[test]
    fn reciprocity(sx in 0.2f64..3.8, sy in 0.2f64..2.8, ex in 0.2f64..3.8, ey in 0.2f64..2.8) {
        let mut scene = room(0.35);
        scene.materials.insert("glass".into(), MaterialProperties::uniform(0.1, 0.3));
        scene.walls.push(Wall::new(Vec2::new(2.0, 0.0), Vec2::new(2.0, 1.7), "glass"));
        let (s, e) = (Vec2::new(sx, sy), Vec2::new(ex, ey));
        let cfg = RirConfig::default();
        let a = tap_multiset(&compute_rir(&scene, s, e, &cfg).unwrap());
        let b = tap_multiset(&compute_rir(&scene, e, s, &cfg).unwrap());
        prop_assert_eq!(a.len(), b.len());
        for ((da, aa), (db, ab)) in a.iter().zip(&b) {
            prop_assert_eq!(da, db);
            prop_assert!((aa - ab).abs() < 1e-12);
        }
    }

    #[test]
    fn more_absorption_never_adds_energy(a in 0.0f64..0.9, bump in 0.0f64..0.1, sx in 0.2f64..3.8, ex in 0.2f64..3.8) {
        let (s, e) = (Vec2::new(sx, 1.1), Vec2::new(ex, 2.2));
        let cfg = RirConfig::default();
        let lo = compute_rir(&room(a), s, e, &cfg).unwrap().energy();
        let hi = compute_rir(&room(a + bump), s, e, &cfg).unwrap().energy();
        prop_assert!(hi <= lo + 1e-15);
    }

    #[test]
    fn convolution_is_linear(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let taps: Vec<f64> = (0..32).map(|_| if rng.gen_bool(0.3) { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect();
        let r = ImpulseResponse { taps, sample_rate: SAMPLE_RATE, source: Vec2::ZERO, ear: Vec2::ZERO };
        let ca = convolve(&Waveform::new(a.clone()), &r).unwrap();
        let cb = convolve(&Waveform::new(b.clone()), &r).unwrap();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let cs = convolve(&Waveform::new(sum), &r).unwrap();
        for i in 0..cs.len() {
            prop_assert!((ca.samples[i] + cb.samples[i] - cs.samples[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn convolution_matches_schoolbook() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let x: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = ImpulseResponse { taps: h.clone(), sample_rate: SAMPLE_RATE, source: Vec2::ZERO, ear: Vec2::ZERO };
        let got = convolve(&Waveform::new(x.clone()), &r).unwrap();
        let want = schoolbook(&x, &h);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.samples.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9);
        }
    }
}

#[test]
fn rt60_single_tap_is_zero() {
    let mut taps = vec![0.0; 100];
    taps[40] = 0.7;
    let r = ImpulseResponse { taps, sample_rate: SAMPLE_RATE, source: Vec2::ZERO, ear: Vec2::ZERO };
    assert_eq!(rt60_estimate(&r).unwrap(), 0.0);
}

#[test]
fn rt60_of_exponential_decay() {
    for k in [5.0f64, 10.0, 20.0] {
        let n = (2.0 * SAMPLE_RATE as f64) as usize;
        let taps: Vec<f64> = (0..n).map(|i| (-k * i as f64 / SAMPLE_RATE as f64).exp()).collect();
        let r = ImpulseResponse { taps, sample_rate: SAMPLE_RATE, source: Vec2::ZERO, ear: Vec2::ZERO };
        let expected = 60.0 / (20.0 * k * std::f64::consts::E.log10());
        let got = rt60_estimate(&r).unwrap();
        assert!((got - expected).abs() / expected < 0.05, "k={k}: {got} vs {expected}");
    }
}

#[test]
fn rt60_silent_is_error() {
    let r = ImpulseResponse { taps: vec![0.0; 10], sample_rate: SAMPLE_RATE, source: Vec2::ZERO, ear: Vec2::ZERO };
    assert!(matches!(rt60_estimate(&r), Err(AcousticsError::SilentRir)));
}

#[test]
fn rt60_decreases_with_absorption() {
    let cfg = RirConfig { max_order: 10, max_length: 0.5, band: 1 };
    let (s, e) = (Vec2::new(1.0, 1.0), Vec2::new(3.0, 2.0));
    let live = rt60_estimate(&compute_rir(&room(0.2), s, e, &cfg).unwrap()).unwrap();
    let dead = rt60_estimate(&compute_rir(&room(0.8), s, e, &cfg).unwrap()).unwrap();
    assert!(live > dead, "{live} vs {dead}");
}

fn noise(seed: u64, n: usize, gain: f64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Waveform::new((0..n).map(|_| rng.gen_range(-gain..gain)).collect())
}

#[test]
fn no_sources_render_silence() {
    let scene = room(0.3);
    let agent = AgentState::new(Vec2::new(2.0, 1.5), 0.0);
    let f = render_binaural(&scene, &[], &agent, &EarGeometry::default(), &RirConfig::default(), None).unwrap();
    assert!(f.left.samples.iter().chain(&f.right.samples).all(|s| *s == 0.0));
}

#[test]
fn left_source_reaches_left_ear_first_and_louder() {
    let scene = free_field(10.0, 10.0);
    let agent = AgentState::new(Vec2::new(5.0, 5.0), 0.0);
    let click = Waveform::new({
        let mut v = vec![0.0; 400];
        v[0] = 0.5;
        v
    });
    let src = ActiveSource { id: "s", position: Vec2::new(5.0, 8.0), window: &click, band: 1 };
    let ears = EarGeometry::default();
    let f = render_binaural(&scene, &[src], &agent, &ears, &RirConfig::default(), None).unwrap();
    let first = |w: &Waveform| w.samples.iter().position(|s| *s != 0.0).unwrap();
    let lag = first(&f.right) as i64 - first(&f.left) as i64;
    assert!((lag - ears.max_itd_samples() as i64).abs() <= 1, "lag {lag}");
    assert!(f.left.peak() >= f.right.peak());
}

#[test]
fn two_source_render_is_sum_of_singles() {
    let scene = room(0.4);
    let agent = AgentState::new(Vec2::new(2.0, 1.5), 0.5);
    let (a, b) = (noise(1, 2000, 0.8), noise(2, 2000, 0.8));
    let sa = ActiveSource { id: "a", position: Vec2::new(0.5, 0.5), window: &a, band: 0 };
    let sb = ActiveSource { id: "b", position: Vec2::new(3.5, 2.5), window: &b, band: 2 };
    let (ears, cfg) = (EarGeometry::default(), RirConfig::default());
    let (l2, r2) = render_binaural_raw(&scene, &[sa.clone(), sb.clone()], &agent, &ears, &cfg, None).unwrap();
    let (la, ra) = render_binaural_raw(&scene, &[sa], &agent, &ears, &cfg, None).unwrap();
    let (lb, rb) = render_binaural_raw(&scene, &[sb], &agent, &ears, &cfg, None).unwrap();
    for i in 0..l2.len() {
        assert!((l2[i] - la[i] - lb[i]).abs() < 1e-9);
        assert!((r2[i] - ra[i] - rb[i]).abs() < 1e-9);
    }
}

#[test]
fn loud_mixture_is_clipped_and_flagged() {
    let scene = free_field(4.0, 4.0);
    let agent = AgentState::new(Vec2::new(2.0, 2.0), 0.0);
    let loud = Waveform::new(vec![0.9; 200]);
    let s = ActiveSource { id: "x", position: Vec2::new(2.05, 2.3), window: &loud, band: 1 };
    let f = render_binaural(&scene, &[s], &agent, &EarGeometry::default(), &RirConfig::default(), None).unwrap();
    assert!(f.clipped);
    assert!(f.left.peak() <= 1.0 && f.right.peak() <= 1.0);
}

#[test]
fn cache_returns_identical_rirs_and_persists() {
    let scene = room(0.3);
    let cache = RirCache::new();
    let cfg = RirConfig::default();
    let (s, e) = (Vec2::new(1.0, 1.0), Vec2::new(3.0, 2.0));
    let a = cache.get_or_compute(&scene, s, e, &cfg).unwrap();
    let b = cache.get_or_compute(&scene, s, e, &cfg).unwrap();
    assert!(std::sync::Arc::ptr_eq(&a, &b));
    assert_eq!(*a, compute_rir(&scene, s, e, &cfg).unwrap());
    let mut buf = Vec::new();
    cache.save(&mut buf).unwrap();
    let loaded = RirCache::load(buf.as_slice()).unwrap();
    assert_eq!(loaded.len(), 1);
    let c = loaded.get_or_compute(&scene, s, e, &cfg).unwrap();
    for (x, y) in a.taps.iter().zip(&c.taps) {
        assert_eq!(*x as f32, *y as f32);
    }
}

#[test]
fn rir_binary_round_trip() {
    let scene = room(0.3);
    let r = compute_rir(&scene, Vec2::new(1.0, 1.0), Vec2::new(3.0, 2.0), &RirConfig::default()).unwrap();
    let bytes = r.to_bytes();
    assert_eq!(&bytes[..4], b"ERIR");
    let (back, used) = ImpulseResponse::from_bytes(&bytes).unwrap();
    assert_eq!(used, bytes.len());
    assert_eq!(back.taps.len(), r.taps.len());
    assert_eq!(back.source, r.source);
}
