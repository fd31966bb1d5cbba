//! Task planning: maps the first observation to a validated skill chain.

mod chain;
mod prompts;
mod remote;

pub use chain::{parse_plan_document, validate_chain, Skill, SkillChain};
pub use prompts::{prompt_name, PromptSet, BISONIC_SYSTEM, PROMPT_VERSION, SINGLE_SYSTEM, USER};
pub use remote::{build_request, plan_remote, strip_fences, RemoteConfig, SCAN_IMAGE_SIZE};

use crate::acoustics::BinauralFrame;
use crate::episodes::{ground_truth_chain, Episode, Task};
use crate::perception::{CategoryClassifier, Listener, PerceptionError, RangeScan};
use crate::world::{Category, World};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid plan: {0}")]
    PlanInvalid(String),
    #[error("unparseable plan after retries: {0}")]
    PlanParse(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Oracle,
    RuleBased,
    Remote,
}

/// What a planner may look at: the navigation observation at the first step,
/// plus the first source's category in dual-source episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerObservation {
    pub audio: BinauralFrame,
    pub scan: RangeScan,
    pub known_first_source: Option<Category>,
}

impl PlannerObservation {
    pub fn capture(episode: &Episode, world: &World, listener: &Listener) -> Result<Self, PlannerError> {
        let obs = listener.observe(world, 0)?;
        let known_first_source = (episode.task == Task::BiSonic)
            .then(|| episode.sources[episode.priority_order[0]].category());
        Ok(Self {
            audio: obs.frame,
            scan: obs.scan,
            known_first_source,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerVerdict {
    pub chain: SkillChain,
    pub backend: Backend,
    pub raw_response: Option<String>,
    /// Filled in by the harness against the ground truth.
    pub planning_correct: Option<bool>,
    /// Set when the rule-based planner fell back on a default chain.
    #[serde(default)]
    pub low_confidence: bool,
}

/// The ground-truth chain, verbatim.
pub fn plan_oracle(episode: &Episode) -> PlannerVerdict {
    PlannerVerdict {
        chain: episode.expected_plan(),
        backend: Backend::Oracle,
        raw_response: None,
        planning_correct: Some(true),
        low_confidence: false,
    }
}

fn chain_for(category: Category) -> Vec<Skill> {
    ground_truth_chain(category).unwrap_or_else(|_| fallback_chain())
}

/// Chain emitted when the audio cannot be classified.
pub fn fallback_chain() -> Vec<Skill> {
    vec![Skill::Nav, Skill::Pick, Skill::Place]
}

/// Classifies the downmixed audio and maps the category to its chain. With a
/// first-source hint, the second source is the strongest other component of
/// the mixture.
pub fn plan_rule_based(obs: &PlannerObservation, classifier: &CategoryClassifier) -> Result<PlannerVerdict, PlannerError> {
    let mono = obs.audio.downmix();
    let mut low_confidence = false;
    let chain = match obs.known_first_source {
        None => match classifier.classify(&mono)? {
            Some(c) => SkillChain::Single(chain_for(c.category)),
            None => {
                low_confidence = true;
                SkillChain::Single(fallback_chain())
            }
        },
        Some(first) => {
            let from_mixture = classifier
                .decompose(&mono)?
                .and_then(|w| w.into_iter().find(|&(c, weight)| c != first && weight > 0.0).map(|(c, _)| c));
            let second = match from_mixture {
                Some(c) => Some(c),
                None => classifier.classify_excluding(&mono, Some(first))?.map(|c| c.category),
            };
            let second_sound = second.map(chain_for).unwrap_or_else(|| {
                low_confidence = true;
                fallback_chain()
            });
            SkillChain::Dual {
                first_sound: chain_for(first),
                second_sound,
            }
        }
    };
    Ok(PlannerVerdict {
        chain: validate_chain(&chain.to_plan_value())?,
        backend: Backend::RuleBased,
        raw_response: None,
        planning_correct: None,
        low_confidence,
    })
}
