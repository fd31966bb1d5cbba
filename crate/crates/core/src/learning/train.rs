//! Seeded PPO training loop, evaluation, checkpoints and learning curves.

use super::env::NavEnv;
use super::net::{entropy, log_softmax, PolicyNet, ACTIONS};
use super::ppo::{update, Adam, LossParts, PpoConfig, RolloutBuffer};
use super::LearningError;
use crate::world::NavAction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

const MAGIC: &[u8; 8] = b"ECHOPPO1";

/// Per-rollout training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rollout: usize,
    pub steps: usize,
    /// Episodes finished during the rollout.
    pub episodes: usize,
    /// Mean undiscounted return of those episodes (NaN when none finished).
    pub mean_return: f64,
    pub success_rate: f64,
    /// Mean policy entropy over the collected states.
    pub entropy: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: PolicyNet,
    pub curve: Vec<CurvePoint>,
}

/// Independent streams derived from the run seed.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn sample_action<R: Rng>(probs: &[f64; ACTIONS], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    ACTIONS - 1
}

/// Network the trainer starts from for a given seed.
pub fn initial_net(input: usize, cfg: &PpoConfig, seed: u64) -> PolicyNet {
    PolicyNet::new(input, cfg.hidden, &mut stream(seed, 0))
}

pub fn train_navigate<E, F>(env_factory: F, cfg: &PpoConfig, seed: u64) -> Result<TrainOutcome, LearningError>
where
    E: NavEnv,
    F: Fn() -> Result<E, LearningError>,
{
    cfg.check()?;
    let mut env = env_factory()?;
    let mut net = initial_net(env.observation_width(), cfg, seed);
    let mut curve = Vec::new();
    if cfg.total_steps == 0 {
        return Ok(TrainOutcome { net, curve });
    }
    let mut env_rng = stream(seed, 1);
    let mut act_rng = stream(seed, 2);
    let mut update_rng = stream(seed, 3);
    let mut opt = Adam::new(net.params.len(), cfg.adam_eps);
    let mut buffer = RolloutBuffer::default();
    let mut obs = env.reset(&mut env_rng)?;
    let mut episode_return = 0.0;
    let mut steps = 0;

    while steps < cfg.total_steps {
        buffer.clear();
        let (mut finished, mut successes, mut return_sum, mut entropy_sum) = (0usize, 0usize, 0.0, 0.0);
        let length = cfg.rollout_length.min(cfg.total_steps - steps);
        for _ in 0..length {
            let cache = net.forward(&obs);
            let (p, logp) = log_softmax(&cache.logits);
            entropy_sum += entropy(&p, &logp);
            let a = sample_action(&p, &mut act_rng);
            let tr = env.step(NavAction::from_index(a))?;
            episode_return += tr.reward;
            buffer.push(std::mem::take(&mut obs), a, logp[a], tr.reward * cfg.reward_scale, cache.value, tr.done);
            obs = if tr.done {
                finished += 1;
                successes += tr.success as usize;
                return_sum += episode_return;
                episode_return = 0.0;
                env.reset(&mut env_rng)?
            } else {
                tr.observation
            };
        }
        let lr = cfg.learning_rate_at(steps);
        steps += length;
        let last_value = net.forward(&obs).value;
        let batch = buffer.finish(last_value, cfg.gamma, cfg.gae_lambda);
        let parts: LossParts = update(&mut net, &mut opt, &batch, cfg, lr, &mut update_rng)?;
        let point = CurvePoint {
            rollout: curve.len(),
            steps,
            episodes: finished,
            mean_return: if finished > 0 { return_sum / finished as f64 } else { f64::NAN },
            success_rate: if finished > 0 { successes as f64 / finished as f64 } else { 0.0 },
            entropy: entropy_sum / length as f64,
            policy_loss: parts.policy,
            value_loss: parts.value,
            learning_rate: lr,
        };
        log::debug!("rollout {} steps {} success {:.2}", point.rollout, steps, point.success_rate);
        curve.push(point);
    }
    Ok(TrainOutcome { net, curve })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_steps: f64,
}

/// Runs `episodes` fresh episodes. Actions are sampled from the policy unless
/// `greedy` is set.
pub fn evaluate<E: NavEnv>(net: &PolicyNet, env: &mut E, episodes: usize, seed: u64, greedy: bool) -> Result<EvalStats, LearningError> {
    let mut env_rng = stream(seed, 11);
    let mut act_rng = stream(seed, 12);
    let (mut successes, mut total_steps) = (0usize, 0usize);
    for _ in 0..episodes {
        let mut obs = env.reset(&mut env_rng)?;
        loop {
            let (p, _) = log_softmax(&net.forward(&obs).logits);
            let a = if greedy { argmax(&p) } else { sample_action(&p, &mut act_rng) };
            let tr = env.step(NavAction::from_index(a))?;
            total_steps += 1;
            if tr.done {
                successes += tr.success as usize;
                break;
            }
            obs = tr.observation;
        }
    }
    let n = episodes.max(1) as f64;
    Ok(EvalStats {
        episodes,
        success_rate: successes as f64 / n,
        mean_steps: total_steps as f64 / n,
    })
}

pub(crate) fn argmax(p: &[f64; ACTIONS]) -> usize {
    let mut best = 0;
    for a in 1..ACTIONS {
        if p[a] > p[best] {
            best = a;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointHeader {
    input: usize,
    hidden: usize,
    actions: usize,
    param_count: usize,
    config: PpoConfig,
}

/// Writes `ECHOPPO1`, a little-endian u32 header length, the JSON header,
/// then every parameter as a little-endian f64.
pub fn write_checkpoint<W: Write>(mut out: W, net: &PolicyNet, cfg: &PpoConfig) -> Result<(), LearningError> {
    let header = serde_json::to_vec(&CheckpointHeader {
        input: net.input,
        hidden: net.hidden,
        actions: ACTIONS,
        param_count: net.params.len(),
        config: *cfg,
    })?;
    out.write_all(MAGIC)?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    for p in &net.params {
        out.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(PolicyNet, PpoConfig), LearningError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(LearningError::Checkpoint("bad magic".into()));
    }
    let mut len = [0u8; 4];
    input.read_exact(&mut len)?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    input.read_exact(&mut header)?;
    let h: CheckpointHeader = serde_json::from_slice(&header)?;
    if h.actions != ACTIONS || h.param_count != PolicyNet::param_count(h.input, h.hidden) {
        return Err(LearningError::Checkpoint(format!(
            "shape {}x{} with {} parameters",
            h.input, h.hidden, h.param_count
        )));
    }
    let mut params = Vec::with_capacity(h.param_count);
    let mut buf = [0u8; 8];
    for _ in 0..h.param_count {
        input.read_exact(&mut buf)?;
        params.push(f64::from_le_bytes(buf));
    }
    let net = PolicyNet {
        input: h.input,
        hidden: h.hidden,
        params,
    };
    if !net.is_finite() {
        return Err(LearningError::Checkpoint("non-finite parameter".into()));
    }
    Ok((net, h.config))
}

pub fn write_curve_csv<W: Write>(out: W, curve: &[CurvePoint]) -> Result<(), LearningError> {
    let mut w = csv::Writer::from_writer(out);
    for p in curve {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
