//! Plan, validate and execute one episode; run a whole split on a worker pool.

use super::report::{aggregate, EvalReport};
use super::{HarnessError, TokenBucket};
use crate::episodes::{Dataset, Episode, Task};
use crate::learning::{PolicyNavController, PolicyNet};
use crate::perception::{CategoryClassifier, Listener};
use crate::planner::{
    plan_oracle, plan_remote, plan_rule_based, Backend, PlannerError, PlannerObservation, PlannerVerdict, PromptSet,
    RemoteConfig, SkillChain,
};
use crate::skills::{run_chain, ChainResult, Controllers, SkillConfig, SkillOutcome};
use crate::soundbank::Split;
use crate::world::{Category, World};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::sync::Arc;

/// A configured planning backend.
pub enum Planner {
    Oracle,
    RuleBased(Arc<CategoryClassifier>),
    Remote {
        config: RemoteConfig,
        prompts: PromptSet,
        bucket: Arc<TokenBucket>,
    },
}

impl Planner {
    pub fn backend(&self) -> Backend {
        match self {
            Planner::Oracle => Backend::Oracle,
            Planner::RuleBased(_) => Backend::RuleBased,
            Planner::Remote { .. } => Backend::Remote,
        }
    }

    pub fn plan(&self, episode: &Episode, world: &World, listener: &Listener) -> Result<PlannerVerdict, PlannerError> {
        match self {
            Planner::Oracle => Ok(plan_oracle(episode)),
            Planner::RuleBased(classifier) => {
                plan_rule_based(&PlannerObservation::capture(episode, world, listener)?, classifier)
            }
            Planner::Remote { config, prompts, bucket } => {
                let obs = PlannerObservation::capture(episode, world, listener)?;
                bucket.acquire();
                plan_remote(&obs, config, prompts)
            }
        }
    }
}

/// Builds a fresh controller set for each episode.
#[derive(Clone)]
pub enum ControllerSet {
    Oracle,
    /// Trained navigation policy with scripted manipulation.
    Trained { net: Arc<PolicyNet>, listener: Listener },
}

impl ControllerSet {
    pub fn build(&self, seed: u64) -> Controllers {
        match self {
            ControllerSet::Oracle => Controllers::oracle(),
            ControllerSet::Trained { net, listener } => Controllers::with_nav(Box::new(PolicyNavController::new(
                (**net).clone(),
                listener.clone(),
                false,
                seed,
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EpisodeStatus {
    Completed,
    /// The planner could not be reached; excluded from every rate.
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub source: usize,
    pub category: Category,
    pub outcomes: Vec<SkillOutcome>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_id: String,
    pub task: Task,
    pub backend: Backend,
    #[serde(flatten)]
    pub status: EpisodeStatus,
    pub plan: Option<SkillChain>,
    pub plan_error: Option<String>,
    /// Whether each stage of the predicted plan equals the expected one.
    pub stage_planning: Vec<bool>,
    pub stages: Vec<StageRecord>,
    /// Every skill succeeded under a fully correct plan.
    pub overall: bool,
    pub steps: usize,
}

impl EpisodeRecord {
    pub fn planning_correct(&self) -> bool {
        !self.stage_planning.is_empty() && self.stage_planning.iter().all(|&c| c)
    }

    pub fn is_skipped(&self) -> bool {
        matches!(self.status, EpisodeStatus::Skipped { .. })
    }

    /// Stage `k` and all before it were planned correctly and executed successfully.
    pub fn stage_overall(&self, k: usize) -> bool {
        (0..=k).all(|i| self.stage_planning.get(i) == Some(&true) && self.stages.get(i).is_some_and(|s| s.success))
    }
}

pub struct EpisodeRun {
    pub record: EpisodeRecord,
    pub chain: Option<ChainResult>,
}

fn stage_planning(predicted: Option<&SkillChain>, expected: &SkillChain) -> Vec<bool> {
    let want = expected.stages();
    match predicted {
        None => vec![false; want.len()],
        Some(p) => {
            let got = p.stages();
            let shape_ok = got.len() == want.len();
            want.iter().enumerate().map(|(k, w)| shape_ok && got[k] == *w).collect()
        }
    }
}

/// Plans from the initial observation and executes the predicted chain, even
/// when it is wrong, so per-skill columns stay populated.
pub fn run_episode(
    episode: &Episode,
    mut world: World,
    planner: &Planner,
    listener: &Listener,
    controllers: &mut Controllers,
    skills: &SkillConfig,
) -> Result<EpisodeRun, HarnessError> {
    let expected = episode.expected_plan();
    let mut record = EpisodeRecord {
        episode_id: episode.episode_id.clone(),
        task: episode.task,
        backend: planner.backend(),
        status: EpisodeStatus::Completed,
        plan: None,
        plan_error: None,
        stage_planning: Vec::new(),
        stages: Vec::new(),
        overall: false,
        steps: 0,
    };
    let verdict = match planner.plan(episode, &world, listener) {
        Ok(v) => v,
        Err(PlannerError::Transport(reason)) => {
            log::warn!("{}: planner unreachable: {reason}", episode.episode_id);
            record.status = EpisodeStatus::Skipped { reason };
            return Ok(EpisodeRun { record, chain: None });
        }
        Err(e @ (PlannerError::PlanInvalid(_) | PlannerError::PlanParse(_))) => {
            record.plan_error = Some(e.to_string());
            record.stage_planning = stage_planning(None, &expected);
            return Ok(EpisodeRun { record, chain: None });
        }
        Err(e) => return Err(e.into()),
    };
    record.stage_planning = stage_planning(Some(&verdict.chain), &expected);
    let result = run_chain(&mut world, episode, &verdict.chain, controllers, skills);
    record.stages = result
        .stages
        .iter()
        .map(|s| StageRecord {
            source: s.source,
            category: episode.sources[s.source].category(),
            outcomes: s.outcomes.clone(),
            success: s.success,
        })
        .collect();
    record.overall = result.overall && record.planning_correct();
    record.steps = result.outcomes().map(|o| o.steps).sum();
    record.plan = Some(verdict.chain);
    Ok(EpisodeRun { record, chain: Some(result) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub split: Split,
    pub jobs: usize,
    pub limit: Option<usize>,
    pub seed: u64,
    pub skills: SkillConfig,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            split: Split::Test,
            jobs: 1,
            limit: None,
            seed: 0,
            skills: SkillConfig::default(),
        }
    }
}

pub struct EvalRun {
    pub report: EvalReport,
    pub records: Vec<EpisodeRecord>,
}

/// Runs every episode of one split on `opts.jobs` workers. Records come back
/// in dataset order, so the report does not depend on scheduling.
pub fn evaluate_dataset(
    dataset: &Dataset,
    listener: &Listener,
    planner: &Planner,
    controllers: &ControllerSet,
    opts: &EvalOptions,
) -> Result<EvalRun, HarnessError> {
    let all = dataset.episodes(opts.split);
    let episodes = &all[..opts.limit.unwrap_or(all.len()).min(all.len())];
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let records = pool.install(|| {
        episodes
            .par_iter()
            .enumerate()
            .map(|(i, ep)| {
                let (scene, grid) = dataset.pool.find(&ep.scene_id).ok_or_else(|| HarnessError::Config(format!(
                    "episode {} references unknown scene {}",
                    ep.episode_id, ep.scene_id
                )))?;
                let world = ep.build_world(scene.clone(), grid.clone())?;
                let mut ctrl = controllers.build(opts.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                Ok(run_episode(ep, world, planner, listener, &mut ctrl, &opts.skills)?.record)
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;
    let report = aggregate(&records)?;
    Ok(EvalRun { report, records })
}

pub fn write_records<W: Write>(mut out: W, records: &[EpisodeRecord]) -> Result<(), HarnessError> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<EpisodeRecord>, HarnessError> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
