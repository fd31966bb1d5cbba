//! Reinforcement learning for the Navigate skill: a small policy/value
//! network with hand-derived gradients, GAE, PPO and an audio-goal task.

mod env;
mod net;
mod policy;
mod ppo;
mod train;

pub use env::{feature_width, nav_features, policy_listener, AudioGoalEnv, EnvConfig, NavEnv, RewardConfig, Transition, SOURCE_ID};
pub use net::{entropy, log_softmax, ForwardCache, PolicyNet, ACTIONS};
pub use policy::PolicyNavController;
pub use ppo::{
    clip_grad_norm, compute_gae, forward_backward, loss_and_grad, normalize_advantages, update, Adam, Batch, LossParts,
    PpoConfig, RolloutBuffer,
};
pub use train::{
    evaluate, initial_net, read_checkpoint, train_navigate, write_checkpoint, write_curve_csv, CurvePoint, EvalStats,
    TrainOutcome,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearningError {
    #[error("loss or gradient is not finite")]
    NonFiniteLoss,
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("environment stepped before reset")]
    NotReset,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Perception(#[from] crate::perception::PerceptionError),
    #[error(transparent)]
    World(#[from] crate::world::WorldError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
