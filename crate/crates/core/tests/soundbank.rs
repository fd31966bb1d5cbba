use echo_core::perception::spectral_flatness;
use echo_core::soundbank::{synthesize_bank, window_of, ClipParams, Split, SoundBank, STEP_SECONDS};
use echo_core::world::Category;
use std::sync::OnceLock;

fn bank() -> &'static SoundBank {
    static BANK: OnceLock<SoundBank> = OnceLock::new();
    BANK.get_or_init(|| synthesize_bank(7))
}

#[test]
fn counts_match_asset_table() {
    let b = bank();
    let expected = [
        (Category::Alarm, 11, 5),
        (Category::Furby, 30, 14),
        (Category::Phone, 19, 9),
        (Category::Sink, 6, 3),
        (Category::Doorbell, 11, 5),
    ];
    for (cat, train, test) in expected {
        assert_eq!(b.count(cat, Split::Train), train, "{cat} train");
        assert_eq!(b.count(cat, Split::Test), test, "{cat} test");
    }
    let train: usize = b.clips.iter().filter(|c| c.split == Split::Train).count();
    assert_eq!((train, b.clips.len() - train, b.clips.len()), (77, 36, 113));
}

#[test]
fn same_seed_is_bit_identical() {
    let again = synthesize_bank(7);
    assert!(again == *bank());
    let other = synthesize_bank(8);
    assert!(other.clips[0].waveform != bank().clips[0].waveform);
}

#[test]
fn clip_parameters_are_unique_across_splits() {
    let b = bank();
    for (i, a) in b.clips.iter().enumerate() {
        for c in &b.clips[i + 1..] {
            assert_ne!(a.params, c.params, "{} vs {}", a.clip_id, c.clip_id);
        }
    }
}

#[test]
fn every_clip_loops_and_matches_its_family() {
    for c in &bank().clips {
        assert!(c.looped);
        assert!(c.waveform.duration() >= 1.0);
        assert_eq!(c.params.category(), c.category);
        assert!(c.waveform.samples.iter().all(|s| s.is_finite() && s.abs() <= 0.9 + 1e-12));
    }
}

#[test]
fn noise_is_flatter_than_beeps() {
    let b = bank();
    let sinks: Vec<f64> = b.clips.iter().filter(|c| c.category == Category::Sink).map(|c| spectral_flatness(&c.waveform.samples)).collect();
    let alarms: Vec<f64> = b.clips.iter().filter(|c| c.category == Category::Alarm).map(|c| spectral_flatness(&c.waveform.samples)).collect();
    let min_sink = sinks.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_alarm = alarms.iter().cloned().fold(0.0, f64::max);
    assert!(min_sink > max_alarm, "sink {min_sink} vs alarm {max_alarm}");
}

#[test]
fn windows_wrap_and_tile() {
    let clip = bank().get("phone_00").unwrap();
    let mut short = clip.clone();
    short.waveform.samples.truncate(32_000);
    let w0 = window_of(&short, 0, STEP_SECONDS);
    assert_eq!(w0.samples, short.waveform.samples[..16_000]);
    assert_eq!(window_of(&short, 2, STEP_SECONDS), w0);

    let n = short.waveform.len();
    let unrolled: Vec<f64> = (0..4 * 16_000).map(|i| short.waveform.samples[i % n]).collect();
    let tiled: Vec<f64> = (0..4).flat_map(|t| window_of(&short, t, STEP_SECONDS).samples).collect();
    assert_eq!(tiled, unrolled);
}

#[test]
fn odd_step_lengths_tile_without_gaps() {
    let clip = bank().get("sink_01").unwrap();
    let step = 0.37;
    let len = (step * 16_000.0f64).round() as usize;
    let n = clip.waveform.len();
    let tiled: Vec<f64> = (0..20).flat_map(|t| window_of(clip, t, step).samples).collect();
    let unrolled: Vec<f64> = (0..20 * len).map(|i| clip.waveform.samples[i % n]).collect();
    assert_eq!(tiled, unrolled);
}

#[test]
fn manifest_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.json");
    bank().save_manifest(&path).unwrap();
    let back = SoundBank::load_manifest(&path).unwrap();
    assert!(back == *bank());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"family\": \"furby\""));
    assert!(matches!(back.clips[0].params, ClipParams::Alarm { .. }));
}
