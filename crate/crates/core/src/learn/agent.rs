use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dist;
use super::model::{Input, Model};
use crate::envs::GridEnv;
use crate::error::Result;
use crate::executor::{Agent, AgentAction};
use crate::sequences::TruncatedSequence;

/// Trained network used as an executor agent.
#[derive(Clone, Debug)]
pub struct LearnedAgent {
    pub model: Arc<Model>,
    pub params: Arc<Vec<f64>>,
    /// Argmax actions instead of sampling.
    pub greedy: bool,
    rng: ChaCha8Rng,
}

impl LearnedAgent {
    pub fn new(model: Arc<Model>, params: Arc<Vec<f64>>, greedy: bool, seed: u64) -> Self {
        LearnedAgent { model, params, greedy, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}

impl Agent for LearnedAgent {
    fn value(&mut self, env: &GridEnv, seq: &TruncatedSequence) -> f64 {
        if seq.is_empty() {
            return 1.0;
        }
        let obs = env.observation();
        let input = Input { obs: &obs, seq, epsilon_allowed: false };
        match self.model.forward(&self.params, &[input]) {
            Ok((out, _)) => out.values[0],
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn act(&mut self, env: &GridEnv, seq: &TruncatedSequence, epsilon_allowed: bool) -> Result<AgentAction> {
        let obs = env.observation();
        let allowed = epsilon_allowed && self.model.epsilon_slot().is_some();
        let (out, _) = self.model.forward(&self.params, &[Input { obs: &obs, seq, epsilon_allowed: allowed }])?;
        let a = if self.greedy { dist::argmax(&out.logits) } else { dist::sample(&out.logits, &mut self.rng) };
        Ok(match self.model.epsilon_slot() {
            Some(slot) if a == slot => AgentAction::Epsilon,
            _ => AgentAction::Env(a),
        })
    }
}
