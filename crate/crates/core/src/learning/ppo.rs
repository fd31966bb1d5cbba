//! Clipped-surrogate PPO: configuration, rollout storage, GAE, the loss with
//! its hand-derived gradient, and an Adam optimizer.

use super::net::{entropy, log_softmax, PolicyNet, ACTIONS};
use super::LearningError;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub learning_rate: f64,
    /// Anneal the learning rate linearly, reaching zero after this many
    /// steps. Fixed to the full-scale budget so shorter runs follow the same
    /// schedule for as long as they last.
    pub decay_horizon: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub rollout_length: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub total_steps: usize,
    pub hidden: usize,
    pub adam_eps: f64,
    /// Multiplier applied to environment rewards before GAE. Keeps value
    /// targets small enough that the value gradient does not dominate the
    /// global norm clip.
    pub reward_scale: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            decay_horizon: 500_000,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            epochs: 2,
            minibatches: 2,
            rollout_length: 128,
            value_coef: 0.5,
            entropy_coef: 0.1,
            max_grad_norm: 0.5,
            total_steps: 50_000,
            hidden: 64,
            adam_eps: 1e-5,
            reward_scale: 0.1,
        }
    }
}

impl PpoConfig {
    /// Full-scale budget and width.
    pub fn paper() -> Self {
        Self {
            total_steps: 500_000,
            hidden: 512,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), LearningError> {
        let ok = self.gamma > 0.0
            && self.gamma <= 1.0
            && (0.0..=1.0).contains(&self.gae_lambda)
            && self.clip > 0.0
            && self.epochs > 0
            && self.minibatches > 0
            && self.rollout_length >= self.minibatches
            && self.hidden > 0
            && self.decay_horizon > 0
            && self.reward_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(LearningError::Config(format!("{self:?}")))
        }
    }
}

/// Transitions of one rollout, in collection order.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// Set when the episode ended after this transition.
    pub dones: Vec<bool>,
}

impl RolloutBuffer {
    pub fn push(&mut self, obs: Vec<f64>, action: usize, log_prob: f64, reward: f64, value: f64, done: bool) {
        self.observations.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }

    /// Training batch with GAE advantages and returns. `last_value` bootstraps
    /// the state after the final transition.
    pub fn finish(&self, last_value: f64, gamma: f64, lambda: f64) -> Batch {
        let (advantages, returns) = compute_gae(&self.rewards, &self.values, &self.dones, last_value, gamma, lambda);
        Batch {
            observations: self.observations.clone(),
            actions: self.actions.clone(),
            old_log_probs: self.log_probs.clone(),
            advantages,
            returns,
        }
    }
}

/// Backward GAE recursion. Returns `(advantages, returns)` with
/// `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Batch {
        Batch {
            observations: idx.iter().map(|&i| self.observations[i].clone()).collect(),
            actions: idx.iter().map(|&i| self.actions[i]).collect(),
            old_log_probs: idx.iter().map(|&i| self.old_log_probs[i]).collect(),
            advantages: idx.iter().map(|&i| self.advantages[i]).collect(),
            returns: idx.iter().map(|&i| self.returns[i]).collect(),
        }
    }
}

/// Shifts and scales to mean 0, standard deviation 1 (population std + 1e-8).
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    adv.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    /// Negated clipped surrogate.
    pub policy: f64,
    /// Mean squared value error (before the coefficient).
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Loss and its exact gradient, without normalization or clipping. The batch
/// advantages are used as given.
pub fn loss_and_grad(net: &PolicyNet, batch: &Batch, cfg: &PpoConfig) -> Result<(LossParts, Vec<f64>), LearningError> {
    if batch.is_empty() {
        return Err(LearningError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut grad = vec![0.0; net.params.len()];
    let mut parts = LossParts::default();
    let (lo, hi) = (1.0 - cfg.clip, 1.0 + cfg.clip);
    for i in 0..batch.len() {
        let cache = net.forward(&batch.observations[i]);
        let (p, logp) = log_softmax(&cache.logits);
        let a = batch.actions[i];
        let adv = batch.advantages[i];
        let ratio = (logp[a] - batch.old_log_probs[i]).exp();
        let clipped = ratio.clamp(lo, hi);
        let unclipped_term = ratio * adv;
        let clipped_term = clipped * adv;
        // d(surrogate)/d(ratio): the clipped branch is flat in the ratio.
        let d_ratio = if unclipped_term <= clipped_term {
            adv
        } else {
            parts.clip_fraction += 1.0 / n;
            0.0
        };
        let h = entropy(&p, &logp);
        parts.policy -= unclipped_term.min(clipped_term) / n;
        parts.entropy += h / n;
        let err = cache.value - batch.returns[i];
        parts.value += err * err / n;

        let mut d_logits = [0.0; ACTIONS];
        for k in 0..ACTIONS {
            let onehot = if k == a { 1.0 } else { 0.0 };
            d_logits[k] = -d_ratio * ratio * (onehot - p[k]) / n
                + cfg.entropy_coef * p[k] * (logp[k] + h) / n;
        }
        let d_value = cfg.value_coef * 2.0 * err / n;
        net.backward(&cache, &d_logits, d_value, &mut grad);
    }
    parts.total = parts.policy + cfg.value_coef * parts.value - cfg.entropy_coef * parts.entropy;
    if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(LearningError::NonFiniteLoss);
    }
    Ok((parts, grad))
}

/// Scales `grad` down to L2 norm `max_norm` when larger. Returns the norm
/// before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Loss and gradient on a batch whose advantages are normalized first; the
/// gradient is L2-clipped at `max_grad_norm`.
pub fn forward_backward(net: &PolicyNet, batch: &Batch, cfg: &PpoConfig) -> Result<(LossParts, Vec<f64>), LearningError> {
    let mut b = batch.clone();
    normalize_advantages(&mut b.advantages);
    let (parts, mut grad) = loss_and_grad(net, &b, cfg)?;
    clip_grad_norm(&mut grad, cfg.max_grad_norm);
    Ok((parts, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(params: usize, eps: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps,
            m: vec![0.0; params],
            v: vec![0.0; params],
            t: 0,
        }
    }

    /// One descent step on `params`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Index order used for one epoch; shuffled when there is more than one
/// minibatch.
fn epoch_order<R: Rng>(n: usize, minibatches: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if minibatches > 1 {
        idx.shuffle(rng);
    }
    idx
}

impl PpoConfig {
    /// Learning rate after `steps` environment steps.
    pub fn learning_rate_at(&self, steps: usize) -> f64 {
        self.learning_rate * (1.0 - steps as f64 / self.decay_horizon as f64).max(0.0)
    }
}

/// `cfg.epochs` passes over the batch in `cfg.minibatches` chunks. Returns
/// the loss parts of the last minibatch.
pub fn update<R: Rng>(
    net: &mut PolicyNet,
    opt: &mut Adam,
    batch: &Batch,
    cfg: &PpoConfig,
    lr: f64,
    rng: &mut R,
) -> Result<LossParts, LearningError> {
    let mut last = LossParts::default();
    let size = batch.len().div_ceil(cfg.minibatches);
    for _ in 0..cfg.epochs {
        let order = epoch_order(batch.len(), cfg.minibatches, rng);
        for chunk in order.chunks(size) {
            let (parts, grad) = forward_backward(net, &batch.select(chunk), cfg)?;
            opt.step(&mut net.params, &grad, lr);
            last = parts;
        }
    }
    if !net.is_finite() {
        return Err(LearningError::NonFiniteLoss);
    }
    Ok(last)
}
