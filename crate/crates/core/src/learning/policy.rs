//! A trained network driving the Navigate skill.

use super::env::nav_features;
use super::net::{log_softmax, PolicyNet};
use super::train::argmax;
use crate::perception::Listener;
use crate::skills::{Controller, SkillTarget};
use crate::world::{AgentAction, NavAction, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hears the world through `listener` (whose scan settings must match the
/// training environment) and picks the most likely action, or samples when
/// `greedy` is off.
pub struct PolicyNavController {
    pub net: PolicyNet,
    pub listener: Listener,
    pub greedy: bool,
    rng: ChaCha8Rng,
    t: usize,
    previous: Option<NavAction>,
}

impl PolicyNavController {
    pub fn new(net: PolicyNet, listener: Listener, greedy: bool, seed: u64) -> Self {
        Self {
            net,
            listener,
            greedy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            t: 0,
            previous: None,
        }
    }
}

impl Controller for PolicyNavController {
    fn reset(&mut self, _world: &World, _target: &SkillTarget) {
        self.t = 0;
        self.previous = None;
    }

    fn act(&mut self, world: &World, _target: &SkillTarget) -> Option<AgentAction> {
        let obs = match self.listener.observe(world, self.t) {
            Ok(o) => o,
            Err(e) => {
                log::warn!("policy observation failed: {e}");
                return None;
            }
        };
        self.t += 1;
        let x = nav_features(&obs.audio, &obs.scan, &self.listener.ears, self.previous);
        if x.len() != self.net.input {
            log::warn!("policy expects {} features, got {}", self.net.input, x.len());
            return None;
        }
        let (p, _) = log_softmax(&self.net.forward(&x).logits);
        let a = if self.greedy {
            argmax(&p)
        } else {
            let u: f64 = self.rng.gen();
            let mut acc = 0.0;
            p.iter().position(|q| {
                acc += q;
                u < acc
            }).unwrap_or(p.len() - 1)
        };
        let action = NavAction::from_index(a);
        self.previous = Some(action);
        Some(AgentAction::Nav(action))
    }
}
