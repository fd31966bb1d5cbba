//! End-to-end evaluation: run planner and skills over a dataset split,
//! aggregate success rates, and write reports and trajectory plots.

mod report;
mod run;
mod svg;

pub use report::{aggregate, read_csv, render_text, write_csv, EvalReport, RateCell, StageReport, COLUMNS};
pub use run::{
    evaluate_dataset, read_records, run_episode, write_records, ControllerSet, EpisodeRecord, EpisodeRun, EpisodeStatus,
    EvalOptions, EvalRun, Planner, StageRecord,
};
pub use svg::{SkillBoundary, TraceArtifact};

use crate::episodes::{load_dataset, Dataset, EpisodeError, Task};
use crate::learning::{policy_listener, read_checkpoint, EnvConfig, LearningError};
use crate::perception::{CategoryClassifier, Listener, PerceptionError};
use crate::planner::{Backend, PlannerError, PromptSet, RemoteConfig};
use crate::skills::{SkillConfig, TraceStep};
use crate::soundbank::{synthesize_bank, Split};
use crate::world::WorldError;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no evaluated episodes")]
    EmptyRun,
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Episodes(#[from] EpisodeError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rate limiter shared by the workers calling a remote planner.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_second: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(capacity: usize, per_second: f64) -> Self {
        let capacity = capacity.max(1) as f64;
        Self {
            capacity,
            per_second,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until a token is available and takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
                let now = Instant::now();
                let (tokens, last) = *state;
                let tokens = (tokens + now.duration_since(last).as_secs_f64() * self.per_second).min(self.capacity);
                if tokens >= 1.0 {
                    *state = (tokens - 1.0, now);
                    return;
                }
                *state = (tokens, now);
                (1.0 - tokens) / self.per_second
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Oracle,
    Trained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSettings {
    pub backend: Backend,
    pub remote: RemoteConfig,
    /// Fitted classifier for the rule-based backend; fitted on the bank when absent.
    pub classifier: Option<PathBuf>,
    /// Directory with replacement prompt files.
    pub prompts: Option<PathBuf>,
    pub requests_per_second: f64,
    pub burst: usize,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            backend: Backend::Oracle,
            remote: RemoteConfig::default(),
            classifier: None,
            prompts: None,
            requests_per_second: 2.0,
            burst: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    /// Dataset manifest written by `generate`.
    pub dataset: PathBuf,
    #[serde(default)]
    pub planner: PlannerSettings,
    #[serde(default = "default_controllers")]
    pub controllers: ControllerKind,
    /// Navigation policy checkpoint for trained controllers.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_split")]
    pub split: Split,
    #[serde(default)]
    pub limit: Option<usize>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub skills: SkillConfig,
}

fn default_controllers() -> ControllerKind {
    ControllerKind::Oracle
}

fn default_jobs() -> usize {
    1
}

fn default_split() -> Split {
    Split::Test
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(task: Task, dataset: impl Into<PathBuf>) -> Self {
        Self {
            task,
            dataset: dataset.into(),
            planner: PlannerSettings::default(),
            controllers: ControllerKind::Oracle,
            checkpoint: None,
            seed: 0,
            jobs: 1,
            split: Split::Test,
            limit: None,
            output_dir: default_output(),
            skills: SkillConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let missing = |what: &str, p: &Path| HarnessError::Config(format!("{what} {} does not exist", p.display()));
        if !self.dataset.exists() {
            return Err(missing("dataset manifest", &self.dataset));
        }
        if self.controllers == ControllerKind::Trained {
            match &self.checkpoint {
                None => return Err(HarnessError::Config("trained controllers need a checkpoint".into())),
                Some(p) if !p.exists() => return Err(missing("checkpoint", p)),
                Some(_) => {}
            }
        }
        for p in [&self.planner.classifier, &self.planner.prompts].into_iter().flatten() {
            if !p.exists() {
                return Err(missing("planner asset", p));
            }
        }
        if self.planner.backend == Backend::Remote && self.planner.remote.endpoint.trim().is_empty() {
            return Err(HarnessError::Config("remote planner needs an endpoint".into()));
        }
        if self.jobs == 0 || self.planner.requests_per_second <= 0.0 {
            return Err(HarnessError::Config("jobs and request rate must be positive".into()));
        }
        Ok(())
    }
}

/// Everything a run needs, loaded from a [`RunConfig`].
pub struct Prepared {
    pub dataset: Dataset,
    pub listener: Listener,
    pub planner: Planner,
    pub controllers: ControllerSet,
    pub options: EvalOptions,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, HarnessError> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.dataset)?;
    if dataset.manifest.task != cfg.task {
        return Err(HarnessError::Config(format!(
            "dataset is for {}, run asks for {}",
            dataset.manifest.task, cfg.task
        )));
    }
    let bank = Arc::new(synthesize_bank(dataset.manifest.bank_seed));
    let listener = Listener::new(bank.clone());
    let planner = match cfg.planner.backend {
        Backend::Oracle => Planner::Oracle,
        Backend::RuleBased => Planner::RuleBased(Arc::new(match &cfg.planner.classifier {
            Some(p) => CategoryClassifier::load(p)?,
            None => CategoryClassifier::fit(&bank),
        })),
        Backend::Remote => Planner::Remote {
            config: cfg.planner.remote.clone(),
            prompts: match &cfg.planner.prompts {
                Some(dir) => PromptSet::load(dir)?,
                None => PromptSet::default(),
            },
            bucket: Arc::new(TokenBucket::new(cfg.planner.burst, cfg.planner.requests_per_second)),
        },
    };
    let controllers = match cfg.controllers {
        ControllerKind::Oracle => ControllerSet::Oracle,
        ControllerKind::Trained => {
            let path = cfg.checkpoint.as_ref().expect("validated");
            let (net, _) = read_checkpoint(fs::File::open(path)?)?;
            ControllerSet::Trained {
                net: Arc::new(net),
                listener: policy_listener(bank, &EnvConfig::default()),
            }
        }
    };
    Ok(Prepared {
        dataset,
        listener,
        planner,
        controllers,
        options: EvalOptions {
            split: cfg.split,
            jobs: cfg.jobs,
            limit: cfg.limit,
            seed: cfg.seed,
            skills: cfg.skills,
        },
    })
}

/// File stem for a run's outputs, e.g. `stow_oracle`.
pub fn output_stem(task: Task, backend: Backend) -> String {
    let b = match backend {
        Backend::Oracle => "oracle",
        Backend::RuleBased => "rule",
        Backend::Remote => "remote",
    };
    format!("{}_{b}", task.slug())
}

/// Evaluates and writes `<stem>_report.csv`, `<stem>_report.txt` and
/// `<stem>_records.jsonl` into the output directory.
pub fn run(cfg: &RunConfig) -> Result<EvalRun, HarnessError> {
    let p = prepare(cfg)?;
    let result = evaluate_dataset(&p.dataset, &p.listener, &p.planner, &p.controllers, &p.options)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let stem = output_stem(cfg.task, p.planner.backend());
    write_csv(fs::File::create(cfg.output_dir.join(format!("{stem}_report.csv")))?, &result.report)?;
    fs::write(cfg.output_dir.join(format!("{stem}_report.txt")), render_text(&result.report))?;
    write_records(
        std::io::BufWriter::new(fs::File::create(cfg.output_dir.join(format!("{stem}_records.jsonl")))?),
        &result.records,
    )?;
    Ok(result)
}

/// Re-runs one episode and returns its plot data and step trace.
pub fn trace_episode(p: &Prepared, episode_id: &str) -> Result<(TraceArtifact, Vec<TraceStep>, EpisodeRecord), HarnessError> {
    let (index, episode) = p
        .dataset
        .train
        .iter()
        .chain(&p.dataset.test)
        .enumerate()
        .find(|(_, e)| e.episode_id == episode_id)
        .ok_or_else(|| HarnessError::Config(format!("no episode `{episode_id}`")))?;
    let (scene, grid) = p
        .dataset
        .pool
        .find(&episode.scene_id)
        .ok_or_else(|| HarnessError::Config(format!("unknown scene {}", episode.scene_id)))?;
    let world = episode.build_world(scene.clone(), grid.clone())?;
    let mut ctrl = p.controllers.build(p.options.seed ^ index as u64);
    let run = run_episode(episode, world, &p.planner, &p.listener, &mut ctrl, &p.options.skills)?;
    let chain = run.chain.unwrap_or_else(|| crate::skills::ChainResult {
        stages: Vec::new(),
        overall: false,
        trace: Vec::new(),
    });
    Ok((TraceArtifact::from_run(episode, &chain), chain.trace, run.record))
}
