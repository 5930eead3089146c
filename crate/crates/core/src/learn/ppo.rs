use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist;
use super::model::{Input, Model};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::sequences::TruncatedSequence;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub workers: usize,
    pub steps_per_worker: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub clip: f64,
    pub lr: f64,
    pub adam_eps: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig::letter_world()
    }
}

impl PpoConfig {
    pub fn letter_world() -> Self {
        PpoConfig {
            workers: 16,
            steps_per_worker: 128,
            epochs: 8,
            minibatch: 256,
            gamma: 0.94,
            gae_lambda: 0.95,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            clip: 0.2,
            lr: 3e-4,
            adam_eps: 1e-8,
        }
    }

    pub fn flat_world() -> Self {
        PpoConfig { gamma: 0.98, entropy_coef: 0.003, ..PpoConfig::letter_world() }
    }

    pub fn check(&self) -> Result<()> {
        let positive = [self.gamma, self.gae_lambda, self.value_coef, self.max_grad_norm, self.lr, self.adam_eps];
        if self.workers == 0 || self.steps_per_worker == 0 || self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::Config("PPO sizes must be positive".into()));
        }
        if positive.iter().any(|&v| !(v > 0.0)) || self.entropy_coef < 0.0 {
            return Err(Error::Config("PPO coefficients must be positive".into()));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) || self.gamma > 1.0 || self.gae_lambda > 1.0 {
            return Err(Error::Config("clip must lie in (0, 1) and discounts in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Generalised advantage estimates and value targets for one trajectory
/// segment. `dones[t]` marks that the episode ended after step `t`;
/// `last_value` bootstraps a segment cut mid-episode.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], last_value: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Adam with bias correction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, eps: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Descends along `g`.
    pub fn step(&mut self, p: &mut [f64], g: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..p.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            p[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Rescales `g` to norm at most `max`; returns the norm before clipping.
pub fn clip_grad_norm(g: &mut [f64], max: f64) -> f64 {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > max {
        let s = max / (norm + 1e-12);
        g.iter_mut().for_each(|v| *v *= s);
    }
    norm
}

/// Flattened rollout data.
#[derive(Clone, Debug, Default)]
pub struct Batch {
    pub obs: Vec<Vec<f64>>,
    pub seqs: Vec<Arc<TruncatedSequence>>,
    pub epsilon_allowed: Vec<bool>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
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

    /// Model inputs for the rows in `idx`.
    pub fn inputs(&self, idx: &[usize]) -> Vec<Input<'_>> {
        idx.iter()
            .map(|&i| Input { obs: &self.obs[i], seq: &self.seqs[i], epsilon_allowed: self.epsilon_allowed[i] })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
}

/// Rows of each chunk processed together; fixed so results do not depend
/// on the execution mode.
const CHUNK: usize = 64;

/// Loss and gradient of the clipped surrogate over `idx`, averaged.
pub fn ppo_loss(model: &Model, p: &[f64], batch: &Batch, idx: &[usize], cfg: &PpoConfig, exec: Exec) -> Result<(UpdateStats, Vec<f64>)> {
    let chunks: Vec<&[usize]> = idx.chunks(CHUNK).collect();
    let m = idx.len() as f64;
    let n_logits = model.num_logits();
    let parts = exec.map(&chunks, |chunk| -> Result<(UpdateStats, Vec<f64>)> {
        let inputs = batch.inputs(chunk);
        let (out, cache) = model.forward(p, &inputs)?;
        let mut dlogits = vec![0.0; out.logits.len()];
        let mut dvalues = vec![0.0; chunk.len()];
        let mut st = UpdateStats::default();
        for (r, &i) in chunk.iter().enumerate() {
            let logits = &out.logits[r * n_logits..(r + 1) * n_logits];
            let a = batch.actions[i];
            let lp = dist::log_softmax(logits)[a];
            let ratio = (lp - batch.log_probs[i]).exp();
            let adv = batch.advantages[i];
            let unclipped = ratio * adv;
            let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
            let h = dist::entropy(logits);
            st.policy_loss -= unclipped.min(clipped) / m;
            st.entropy += h / m;
            let dv = out.values[r] - batch.returns[i];
            st.value_loss += dv * dv / m;
            // d(-surrogate)/d log π(a) is -A·ratio while the unclipped term is active
            let c_lp = if unclipped <= clipped { -adv * ratio / m } else { 0.0 };
            let g = dist::grad(logits, a, c_lp, -cfg.entropy_coef / m);
            dlogits[r * n_logits..(r + 1) * n_logits].copy_from_slice(&g);
            dvalues[r] = 2.0 * cfg.value_coef * dv / m;
        }
        let mut g = vec![0.0; p.len()];
        model.backward(p, &cache, &dlogits, &dvalues, &mut g);
        Ok((st, g))
    });
    let mut total = UpdateStats::default();
    let mut grad = vec![0.0; p.len()];
    for part in parts {
        let (st, g) = part?;
        total.policy_loss += st.policy_loss;
        total.value_loss += st.value_loss;
        total.entropy += st.entropy;
        for (a, v) in grad.iter_mut().zip(&g) {
            *a += v;
        }
    }
    Ok((total, grad))
}

/// Several epochs of clipped-surrogate minibatch updates. A non-finite loss
/// or gradient aborts before the parameters are touched.
pub fn ppo_update(
    model: &Model,
    p: &mut [f64],
    adam: &mut Adam,
    batch: &Batch,
    cfg: &PpoConfig,
    rng: &mut impl Rng,
    exec: Exec,
) -> Result<UpdateStats> {
    let mut idx: Vec<usize> = (0..batch.len()).collect();
    let mut mean = UpdateStats::default();
    let mut count = 0.0;
    for _ in 0..cfg.epochs {
        idx.shuffle(rng);
        for mb in idx.chunks(cfg.minibatch) {
            let (st, mut g) = ppo_loss(model, p, batch, mb, cfg, exec)?;
            let loss = st.policy_loss + cfg.value_coef * st.value_loss - cfg.entropy_coef * st.entropy;
            if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("PPO loss or gradient".into()));
            }
            let norm = clip_grad_norm(&mut g, cfg.max_grad_norm);
            adam.step(p, &g);
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("parameters after update".into()));
            }
            mean.policy_loss += st.policy_loss;
            mean.value_loss += st.value_loss;
            mean.entropy += st.entropy;
            mean.grad_norm += norm;
            count += 1.0;
        }
    }
    if count > 0.0 {
        mean.policy_loss /= count;
        mean.value_loss /= count;
        mean.entropy /= count;
        mean.grad_norm /= count;
    }
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gae_recursion() {
        let (adv, ret) = gae(&[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0], &[false, false, true], 0.0, 0.94, 0.95);
        // hand-evaluated: A2 = 1, A1 = 0.94·0.95, A0 = (0.94·0.95)²
        let c = 0.94 * 0.95;
        assert!((adv[2] - 1.0).abs() < 1e-15);
        assert!((adv[1] - c).abs() < 1e-15);
        assert!((adv[0] - c * c).abs() < 1e-15);
        assert!((adv[0] - 0.797449).abs() < 1e-12);
        assert_eq!(adv, ret);
    }

    #[test]
    fn gae_bootstraps_and_resets() {
        let (adv, _) = gae(&[1.0, 0.0], &[0.5, 0.2], &[true, false], 2.0, 0.9, 0.5);
        assert!((adv[1] - (0.9 * 2.0 - 0.2)).abs() < 1e-15);
        assert!((adv[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(n <= 0.5 + 1e-9);
        let mut small = vec![0.1, 0.1];
        clip_grad_norm(&mut small, 0.5);
        assert_eq!(small, vec![0.1, 0.1]);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let mut adam = Adam::new(2, 0.01, 1e-8);
        let mut p = vec![1.0, -1.0];
        adam.step(&mut p, &[2.0, -0.5]);
        assert!((p[0] - 0.99).abs() < 1e-9 && (p[1] + 0.99).abs() < 1e-9);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        use crate::envs::ObsSpec;
        use crate::learn::model::{ActionHead, ModelConfig, ObsEncoderConfig};
        use crate::learn::nn::{tests::check_grad, Activation};
        use crate::logic::{Assignment, AssignmentSet};
        use crate::sequences::ReachAvoidStep;

        let cfg = ModelConfig {
            obs_encoder: ObsEncoderConfig::Mlp { hidden: vec![3] },
            phi_dim: 3,
            rho: vec![4, 3],
            gru_hidden: 3,
            actor: vec![5],
            critic: vec![4],
            critic_activation: Activation::Tanh,
            action_head: ActionHead::Categorical,
            epsilon_action: true,
        };
        let model = Model::new(cfg, ObsSpec::Vector(2), 2, 3).unwrap();
        let mut p = model.init(4);
        for (i, x) in p.iter_mut().enumerate() {
            *x += 0.05 * (i as f64 * 0.9).cos();
        }
        let set = |a: &[u32]| AssignmentSet::from_assignments(2, a.iter().map(|&i| Assignment(i)));
        let seq = Arc::new(TruncatedSequence { steps: vec![ReachAvoidStep::new(set(&[1]), set(&[2]))], k: 1 });
        let mut batch = Batch::default();
        let n = 6;
        for i in 0..n {
            batch.obs.push(vec![i as f64 * 0.2, 1.0 - i as f64 * 0.1]);
            batch.seqs.push(seq.clone());
            batch.epsilon_allowed.push(i % 2 == 0);
            batch.actions.push(i % 3);
            batch.advantages.push(if i % 2 == 0 { 0.7 } else { -0.4 });
            batch.returns.push(0.3 * i as f64 - 0.5);
        }
        // behaviour log-probs around the current policy, one ratio far outside the clip range
        let inputs = batch.inputs(&(0..n).collect::<Vec<_>>());
        let (out, _) = model.forward(&p, &inputs).unwrap();
        let nl = model.num_logits();
        for i in 0..n {
            let lp = dist::log_softmax(&out.logits[i * nl..(i + 1) * nl])[batch.actions[i]];
            batch.log_probs.push(lp + if i == 0 { -0.8 } else { 0.05 * i as f64 - 0.1 });
        }
        let pc = PpoConfig::letter_world();
        let idx: Vec<usize> = (0..n).collect();
        let (_, g) = ppo_loss(&model, &p, &batch, &idx, &pc, Exec::Sequential).unwrap();
        let total = |p: &[f64]| {
            let (st, _) = ppo_loss(&model, p, &batch, &idx, &pc, Exec::Sequential).unwrap();
            st.policy_loss + pc.value_coef * st.value_loss - pc.entropy_coef * st.entropy
        };
        let len = p.len();
        let err = check_grad(&mut p, &g, len, total);
        assert!(err < 1e-4, "relative gradient error {err}");
    }
}
