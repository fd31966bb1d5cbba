//! Train/test episode sets per task, persisted as scene JSON files, JSON-lines
//! episodes and a manifest.

use super::generate::{generate_episode, GenerationConfig, ScenePool};
use super::scenes::generate_scene_pool;
use super::validate::validate_with_grid;
use super::{read_episodes, write_episodes, Episode, EpisodeError, Task};
use crate::soundbank::{SoundBank, Split};
use crate::world::Scene;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

pub const DEFAULT_SCENE_COUNT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Full benchmark sizes.
    Paper,
    /// 100 episodes per task, same train/test proportions.
    Desk,
}

impl Preset {
    /// `(train, test)` episode counts.
    pub fn counts(self, task: Task) -> (usize, usize) {
        match (self, task) {
            (Preset::Paper, Task::BiSonic) => (660, 355),
            (Preset::Paper, _) => (660, 222),
            (Preset::Desk, Task::BiSonic) => (65, 35),
            (Preset::Desk, _) => (75, 25),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = EpisodeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            _ => Err(EpisodeError::UnknownTask(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub task: Task,
    pub preset: Preset,
    pub seed: u64,
    pub bank_seed: u64,
    pub train_episodes: usize,
    pub test_episodes: usize,
    pub train_file: String,
    pub test_file: String,
    /// Scene files relative to the manifest directory.
    pub scene_files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub pool: ScenePool,
    pub train: Vec<Episode>,
    pub test: Vec<Episode>,
}

impl Dataset {
    pub fn episodes(&self, split: Split) -> &[Episode] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    /// Writes `scenes/<id>.json`, `<task>_<split>.jsonl` and `<task>_manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<(), EpisodeError> {
        fs::create_dir_all(dir.join("scenes"))?;
        for (scene, file) in self.pool.scenes.iter().zip(&self.manifest.scene_files) {
            fs::write(dir.join(file), scene.to_json())?;
        }
        write_episodes(BufWriter::new(File::create(dir.join(&self.manifest.train_file))?), &self.train)?;
        write_episodes(BufWriter::new(File::create(dir.join(&self.manifest.test_file))?), &self.test)?;
        let path = dir.join(format!("{}_manifest.json", self.manifest.task.slug()));
        fs::write(path, serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(())
    }
}

/// Per-episode stream: independent of generation order, so parallel and
/// sequential runs agree.
fn episode_rng(seed: u64, task: Task, split: Split, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = ((task as u64) << 40) | ((split == Split::Test) as u64) << 32 | index as u64;
    rng.set_stream(stream);
    rng
}

pub fn generate_dataset(task: Task, preset: Preset, seed: u64, bank: &SoundBank) -> Result<Dataset, EpisodeError> {
    generate_dataset_with(task, preset.counts(task), preset, seed, bank, &GenerationConfig::default())
}

/// Like [`generate_dataset`] with explicit counts and generation settings.
pub fn generate_dataset_with(
    task: Task,
    (n_train, n_test): (usize, usize),
    preset: Preset,
    seed: u64,
    bank: &SoundBank,
    cfg: &GenerationConfig,
) -> Result<Dataset, EpisodeError> {
    let pool = ScenePool::new(generate_scene_pool(seed, DEFAULT_SCENE_COUNT))?;
    let make = |split: Split, n: usize| -> Result<Vec<Episode>, EpisodeError> {
        let tag = if split == Split::Train { "train" } else { "test" };
        (0..n)
            .into_par_iter()
            .map(|i| {
                let id = format!("{}-{tag}-{i:05}", task.slug());
                generate_episode(task, &pool, bank, split, &id, cfg, &mut episode_rng(seed, task, split, i))
            })
            .collect()
    };
    let train = make(Split::Train, n_train)?;
    let test = make(Split::Test, n_test)?;
    let slug = task.slug();
    let manifest = DatasetManifest {
        task,
        preset,
        seed,
        bank_seed: bank.seed,
        train_episodes: train.len(),
        test_episodes: test.len(),
        train_file: format!("{slug}_train.jsonl"),
        test_file: format!("{slug}_test.jsonl"),
        scene_files: pool.scenes.iter().map(|s| format!("scenes/{}.json", s.id)).collect(),
    };
    Ok(Dataset {
        manifest,
        pool,
        train,
        test,
    })
}

/// Loads a dataset from its manifest and re-validates every episode against
/// its scene.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, EpisodeError> {
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let scenes = manifest
        .scene_files
        .iter()
        .map(|f| Scene::load(&dir.join(f)))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = ScenePool::new(scenes)?;
    let read = |file: &str| -> Result<Vec<Episode>, EpisodeError> {
        let episodes = read_episodes(BufReader::new(File::open(dir.join(file))?))?;
        for e in &episodes {
            let (scene, grid) = pool.find(&e.scene_id).ok_or_else(|| EpisodeError::UnknownScene {
                id: e.episode_id.clone(),
                scene: e.scene_id.clone(),
            })?;
            let report = validate_with_grid(e, scene, grid);
            if !report.passed() {
                return Err(EpisodeError::Invalid {
                    id: e.episode_id.clone(),
                    reasons: report.summary(),
                });
            }
        }
        Ok(episodes)
    };
    let train = read(&manifest.train_file)?;
    let test = read(&manifest.test_file)?;
    Ok(Dataset {
        manifest,
        pool,
        train,
        test,
    })
}
