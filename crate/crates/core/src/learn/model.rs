use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::deepsets::{SetCache, SetEncoder, SetKey};
use super::nn::{Activation, Conv2, ConvCache, Gru, GruCache, Mlp, MlpCache, ParamLayout};
use crate::envs::ObsSpec;
use crate::error::{Error, Result};
use crate::sequences::{Reach, TruncatedSequence};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObsEncoderConfig {
    /// Stack of 2×2 ReLU convolutions with the given output channels.
    Conv { channels: Vec<usize> },
    /// ReLU perceptron with the given hidden widths.
    Mlp { hidden: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionHead {
    Categorical,
    /// Mean and log standard deviation per dimension.
    Gaussian { dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub obs_encoder: ObsEncoderConfig,
    pub phi_dim: usize,
    /// Widths of ρ after the φ layer; the last one is the set embedding size.
    pub rho: Vec<usize>,
    pub gru_hidden: usize,
    pub actor: Vec<usize>,
    pub critic: Vec<usize>,
    pub critic_activation: Activation,
    pub action_head: ActionHead,
    /// Extra output for the ε-action.
    pub epsilon_action: bool,
}

impl ModelConfig {
    pub fn letter_world() -> Self {
        ModelConfig {
            obs_encoder: ObsEncoderConfig::Conv { channels: vec![16, 32, 64] },
            phi_dim: 32,
            rho: vec![32, 32],
            gru_hidden: 64,
            actor: vec![64, 64, 64],
            critic: vec![64, 64],
            critic_activation: Activation::Tanh,
            action_head: ActionHead::Categorical,
            epsilon_action: true,
        }
    }

    pub fn flat_world() -> Self {
        ModelConfig {
            obs_encoder: ObsEncoderConfig::Mlp { hidden: vec![16, 16] },
            phi_dim: 16,
            rho: vec![32, 16],
            gru_hidden: 32,
            actor: vec![64, 64, 64],
            critic: vec![64, 64],
            critic_activation: Activation::Relu,
            action_head: ActionHead::Categorical,
            epsilon_action: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum ObsEncoder {
    Conv { layers: Vec<Conv2>, channels: usize, height: usize, width: usize },
    Mlp(Mlp),
}

enum ObsCache {
    Conv(Vec<ConvCache>),
    Mlp(MlpCache),
}

/// Sequence-conditioned actor-critic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub num_actions: usize,
    pub num_props: usize,
    obs: ObsEncoder,
    obs_dim: usize,
    sets: SetEncoder,
    gru: Gru,
    actor: Mlp,
    critic: Mlp,
}

/// One policy query.
#[derive(Clone, Copy, Debug)]
pub struct Input<'a> {
    pub obs: &'a [f64],
    pub seq: &'a TruncatedSequence,
    pub epsilon_allowed: bool,
}

#[derive(Clone, Debug)]
pub struct Output {
    /// `batch × num_logits`; a masked ε slot holds negative infinity.
    pub logits: Vec<f64>,
    pub values: Vec<f64>,
}

pub struct ForwardCache {
    batch: usize,
    obs: ObsCache,
    sets: SetCache,
    /// Unique sequence of each sample.
    seq_of: Vec<usize>,
    /// Per unique sequence, set indices of each step's reach and avoid parts.
    seq_sets: Vec<Vec<(usize, usize)>>,
    max_len: usize,
    gru: GruCache,
    actor: MlpCache,
    critic: MlpCache,
    masked: Vec<bool>,
}

fn step_keys(seq: &TruncatedSequence) -> impl Iterator<Item = (SetKey, SetKey)> + '_ {
    seq.steps.iter().map(|s| {
        let plus = match &s.reach {
            Reach::Set(set) => SetKey::Set(set.clone()),
            Reach::Epsilon => SetKey::Epsilon,
        };
        (plus, SetKey::Set(s.avoid.clone()))
    })
}

impl Model {
    pub fn new(config: ModelConfig, obs: ObsSpec, num_props: usize, num_actions: usize) -> Result<Self> {
        let mut layout = ParamLayout::default();
        let (obs_enc, obs_dim) = match (&config.obs_encoder, obs) {
            (ObsEncoderConfig::Conv { channels }, ObsSpec::Image { channels: c, height, width }) => {
                if height <= channels.len() || width <= channels.len() {
                    return Err(Error::Config("image too small for the convolution stack".into()));
                }
                let mut layers = Vec::new();
                let mut c_in = c;
                for (i, &c_out) in channels.iter().enumerate() {
                    layers.push(Conv2::new(&mut layout, &format!("conv.{i}"), c_in, c_out));
                    c_in = c_out;
                }
                let k = channels.len();
                let dim = (height - k) * (width - k) * c_in;
                (ObsEncoder::Conv { layers, channels: c, height, width }, dim)
            }
            (ObsEncoderConfig::Mlp { hidden }, ObsSpec::Vector(n)) => {
                let mut sizes = vec![n];
                sizes.extend_from_slice(hidden);
                let dim = *sizes.last().unwrap();
                (ObsEncoder::Mlp(Mlp::new(&mut layout, "obs", &sizes, Activation::Relu, Activation::Relu)), dim)
            }
            _ => return Err(Error::Config("observation encoder does not match the observation kind".into())),
        };
        let sets = SetEncoder::new(&mut layout, num_props, config.phi_dim, &config.rho);
        let gru = Gru::new(&mut layout, "gru", 2 * sets.dim(), config.gru_hidden);
        let joint = obs_dim + config.gru_hidden;
        let n_logits = match config.action_head {
            ActionHead::Categorical => num_actions,
            ActionHead::Gaussian { dim } => 2 * dim,
        } + usize::from(config.epsilon_action);
        let mut sizes = vec![joint];
        sizes.extend_from_slice(&config.actor);
        sizes.push(n_logits);
        let actor = Mlp::new(&mut layout, "actor", &sizes, Activation::Relu, Activation::Identity);
        let mut sizes = vec![joint];
        sizes.extend_from_slice(&config.critic);
        sizes.push(1);
        let critic = Mlp::new(&mut layout, "critic", &sizes, config.critic_activation, Activation::Identity);
        Ok(Model { config, layout, num_actions, num_props, obs: obs_enc, obs_dim, sets, gru, actor, critic })
    }

    pub fn num_params(&self) -> usize {
        self.layout.len
    }

    pub fn num_logits(&self) -> usize {
        self.actor.n_out()
    }

    pub fn init(&self, seed: u64) -> Vec<f64> {
        self.layout.init(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Index of the ε output, if any.
    pub fn epsilon_slot(&self) -> Option<usize> {
        self.config.epsilon_action.then(|| self.num_logits() - 1)
    }

    fn encode_obs(&self, p: &[f64], inputs: &[Input]) -> Result<(Vec<f64>, ObsCache)> {
        let b = inputs.len();
        match &self.obs {
            ObsEncoder::Conv { layers, channels, height, width } => {
                let (c, h, w) = (*channels, *height, *width);
                let mut x = Vec::with_capacity(b * c * h * w);
                for inp in inputs {
                    if inp.obs.len() != c * h * w {
                        return Err(Error::Shape(format!("observation has {} values, expected {}", inp.obs.len(), c * h * w)));
                    }
                    for i in 0..h * w {
                        x.extend((0..c).map(|ch| inp.obs[ch * h * w + i]));
                    }
                }
                let mut caches: Vec<ConvCache> = Vec::new();
                let (mut hh, mut ww) = (h, w);
                for l in layers {
                    let input = caches.last().map_or(&x, |c| c.output_vec());
                    let cache = l.forward(p, input, hh, ww, b);
                    caches.push(cache);
                    hh -= 1;
                    ww -= 1;
                }
                let out = caches.last().unwrap().output_vec().clone();
                Ok((out, ObsCache::Conv(caches)))
            }
            ObsEncoder::Mlp(m) => {
                let mut x = Vec::with_capacity(b * m.n_in());
                for inp in inputs {
                    if inp.obs.len() != m.n_in() {
                        return Err(Error::Shape(format!("observation has {} values, expected {}", inp.obs.len(), m.n_in())));
                    }
                    x.extend_from_slice(inp.obs);
                }
                let cache = m.forward(p, x, b);
                Ok((cache.output().to_vec(), ObsCache::Mlp(cache)))
            }
        }
    }

    pub fn forward(&self, p: &[f64], inputs: &[Input]) -> Result<(Output, ForwardCache)> {
        assert_eq!(p.len(), self.layout.len);
        let b = inputs.len();
        let (obs_feat, obs_cache) = self.encode_obs(p, inputs)?;

        // unique sequences and sets, in order of first appearance
        let mut seq_index: HashMap<&TruncatedSequence, usize> = HashMap::new();
        let mut seqs: Vec<&TruncatedSequence> = Vec::new();
        let mut seq_of = Vec::with_capacity(b);
        for inp in inputs {
            if inp.seq.is_empty() {
                return Err(Error::Shape("empty sequence".into()));
            }
            let j = *seq_index.entry(inp.seq).or_insert_with(|| {
                seqs.push(inp.seq);
                seqs.len() - 1
            });
            seq_of.push(j);
        }
        let mut set_index: HashMap<SetKey, usize> = HashMap::new();
        let mut keys: Vec<SetKey> = Vec::new();
        let mut intern = |k: SetKey| -> usize {
            *set_index.entry(k.clone()).or_insert_with(|| {
                keys.push(k);
                keys.len() - 1
            })
        };
        let seq_sets: Vec<Vec<(usize, usize)>> =
            seqs.iter().map(|s| step_keys(s).map(|(a, b)| (intern(a), intern(b))).collect()).collect();
        let (emb, set_cache) = self.sets.forward(p, &keys);
        let e = self.sets.dim();

        // backwards GRU, shorter sequences start later so all end together
        let j_count = seqs.len();
        let max_len = seq_sets.iter().map(Vec::len).max().unwrap_or(0);
        let mut gru_inputs = Vec::with_capacity(max_len);
        for u in 0..max_len {
            let s = max_len - 1 - u;
            let mut x = vec![0.0; j_count * 2 * e];
            let mut mask = vec![false; j_count];
            for (j, steps) in seq_sets.iter().enumerate() {
                if s < steps.len() {
                    let (a, m) = steps[s];
                    x[j * 2 * e..j * 2 * e + e].copy_from_slice(&emb[a * e..(a + 1) * e]);
                    x[j * 2 * e + e..(j + 1) * 2 * e].copy_from_slice(&emb[m * e..(m + 1) * e]);
                    mask[j] = true;
                }
            }
            gru_inputs.push((x, mask));
        }
        let (h, gru_cache) = self.gru.forward(p, gru_inputs, j_count);
        let hd = self.config.gru_hidden;

        let joint_dim = self.obs_dim + hd;
        let mut joint = Vec::with_capacity(b * joint_dim);
        for (i, &j) in seq_of.iter().enumerate() {
            joint.extend_from_slice(&obs_feat[i * self.obs_dim..(i + 1) * self.obs_dim]);
            joint.extend_from_slice(&h[j * hd..(j + 1) * hd]);
        }
        let actor = self.actor.forward(p, joint.clone(), b);
        let critic = self.critic.forward(p, joint, b);
        let mut logits = actor.output().to_vec();
        let n = self.num_logits();
        let mut masked = vec![false; b];
        if let Some(slot) = self.epsilon_slot() {
            for (i, inp) in inputs.iter().enumerate() {
                if !inp.epsilon_allowed {
                    logits[i * n + slot] = f64::NEG_INFINITY;
                    masked[i] = true;
                }
            }
        }
        let values = critic.output().to_vec();
        let cache = ForwardCache {
            batch: b,
            obs: obs_cache,
            sets: set_cache,
            seq_of,
            seq_sets,
            max_len,
            gru: gru_cache,
            actor,
            critic,
            masked,
        };
        Ok((Output { logits, values }, cache))
    }

    /// Accumulates the gradient of `Σ dlogits·logits + Σ dvalues·values`.
    /// Masked entries of `dlogits` are ignored.
    pub fn backward(&self, p: &[f64], cache: &ForwardCache, dlogits: &[f64], dvalues: &[f64], g: &mut [f64]) {
        let b = cache.batch;
        let n = self.num_logits();
        let mut dl = dlogits.to_vec();
        if let Some(slot) = self.epsilon_slot() {
            for (i, &m) in cache.masked.iter().enumerate() {
                if m {
                    dl[i * n + slot] = 0.0;
                }
            }
        }
        let mut djoint = self.actor.backward(p, &cache.actor, &dl, g);
        let dc = self.critic.backward(p, &cache.critic, dvalues, g);
        for (a, v) in djoint.iter_mut().zip(&dc) {
            *a += v;
        }
        let hd = self.config.gru_hidden;
        let joint_dim = self.obs_dim + hd;
        let j_count = cache.seq_sets.len();
        let mut dobs = Vec::with_capacity(b * self.obs_dim);
        let mut dh = vec![0.0; j_count * hd];
        for (i, &j) in cache.seq_of.iter().enumerate() {
            let row = &djoint[i * joint_dim..(i + 1) * joint_dim];
            dobs.extend_from_slice(&row[..self.obs_dim]);
            for (a, v) in dh[j * hd..(j + 1) * hd].iter_mut().zip(&row[self.obs_dim..]) {
                *a += v;
            }
        }
        let dxs = self.gru.backward(p, &cache.gru, &dh, g);
        let e = self.sets.dim();
        let num_keys = cache.seq_sets.iter().flatten().map(|&(a, m)| a.max(m) + 1).max().unwrap_or(0);
        let mut demb = vec![0.0; num_keys * e];
        for (u, dx) in dxs.iter().enumerate() {
            let s = cache.max_len - 1 - u;
            for (j, steps) in cache.seq_sets.iter().enumerate() {
                if s < steps.len() {
                    let (a, m) = steps[s];
                    for k in 0..e {
                        demb[a * e + k] += dx[j * 2 * e + k];
                        demb[m * e + k] += dx[j * 2 * e + e + k];
                    }
                }
            }
        }
        self.sets.backward(p, &cache.sets, &demb, g);
        match (&self.obs, &cache.obs) {
            (ObsEncoder::Conv { layers, .. }, ObsCache::Conv(caches)) => {
                let mut d = dobs;
                for (l, c) in layers.iter().zip(caches).rev() {
                    d = l.backward(p, c, &d, g);
                }
            }
            (ObsEncoder::Mlp(m), ObsCache::Mlp(c)) => {
                m.backward(p, c, &dobs, g);
            }
            _ => unreachable!(),
        }
    }

    /// Sequence embedding alone, for tests and inspection.
    pub fn encode_sequence(&self, p: &[f64], seq: &TruncatedSequence) -> Vec<f64> {
        let keys: Vec<SetKey> = step_keys(seq).flat_map(|(a, b)| [a, b]).collect();
        let (emb, _) = self.sets.forward(p, &keys);
        let e = self.sets.dim();
        let inputs = (0..seq.len()).rev().map(|s| (emb[2 * s * e..2 * (s + 1) * e].to_vec(), vec![true])).collect();
        self.gru.forward(p, inputs, 1).0
    }

    pub fn set_encoder(&self) -> &SetEncoder {
        &self.sets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::dist;
    use crate::learn::nn::tests::check_grad;
    use crate::logic::{Assignment, AssignmentSet};
    use crate::sequences::ReachAvoidStep;

    fn set(items: &[u32]) -> AssignmentSet {
        AssignmentSet::from_assignments(2, items.iter().map(|&i| Assignment(i)))
    }

    fn seq(steps: Vec<ReachAvoidStep>) -> TruncatedSequence {
        TruncatedSequence { steps, k: 1 }
    }

    fn small(obs: ObsEncoderConfig, spec: ObsSpec) -> (Model, Vec<f64>) {
        let cfg = ModelConfig {
            obs_encoder: obs,
            phi_dim: 4,
            rho: vec![5, 3],
            gru_hidden: 4,
            actor: vec![6],
            critic: vec![5],
            critic_activation: Activation::Tanh,
            action_head: ActionHead::Categorical,
            epsilon_action: true,
        };
        let m = Model::new(cfg, spec, 2, 4).unwrap();
        let p = m.init(11);
        (m, p)
    }

    fn sequences() -> Vec<TruncatedSequence> {
        vec![
            seq(vec![ReachAvoidStep::new(set(&[1, 3]), set(&[2])), ReachAvoidStep::new(set(&[2]), set(&[]))]),
            seq(vec![ReachAvoidStep::epsilon(set(&[1]))]),
            seq(vec![
                ReachAvoidStep::new(set(&[2]), set(&[])),
                ReachAvoidStep::new(set(&[1, 3]), set(&[2])),
                ReachAvoidStep::new(set(&[0, 1, 2, 3]), set(&[])),
            ]),
        ]
    }

    fn obs(i: usize, n: usize) -> Vec<f64> {
        (0..n).map(|j| ((i * 7 + j * 3) % 5) as f64 / 4.0).collect()
    }

    fn whole_gradient(m: &Model, mut p: Vec<f64>, n_obs: usize) {
        // zero biases put ReLUs on their kink for the empty set
        for (i, x) in p.iter_mut().enumerate() {
            *x += 0.05 * (i as f64 * 1.3).sin();
        }
        let seqs = sequences();
        let observations: Vec<Vec<f64>> = (0..4).map(|i| obs(i, n_obs)).collect();
        let inputs: Vec<Input> = (0..4)
            .map(|i| Input { obs: &observations[i], seq: &seqs[i % 3], epsilon_allowed: i % 2 == 0 })
            .collect();
        let nl = m.num_logits();
        let wl: Vec<f64> = (0..4 * nl).map(|i| (i as f64 * 0.71).cos()).collect();
        let wv: Vec<f64> = (0..4).map(|i| 1.0 - 0.3 * i as f64).collect();
        let loss = |p: &[f64]| -> f64 {
            let (out, _) = m.forward(p, &inputs).unwrap();
            let l: f64 = out.logits.iter().zip(&wl).filter(|(a, _)| a.is_finite()).map(|(a, b)| a * b).sum();
            l + out.values.iter().zip(&wv).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = m.forward(&p, &inputs).unwrap();
        let mut g = vec![0.0; p.len()];
        m.backward(&p, &cache, &wl, &wv, &mut g);
        let n = p.len();
        let err = check_grad(&mut p, &g, n, loss);
        assert!(err < 1e-4, "relative gradient error {err}");
    }

    #[test]
    fn gradient_mlp_encoder() {
        let (m, p) = small(ObsEncoderConfig::Mlp { hidden: vec![3] }, ObsSpec::Vector(3));
        whole_gradient(&m, p, 3);
    }

    #[test]
    fn gradient_conv_encoder() {
        let spec = ObsSpec::Image { channels: 2, height: 3, width: 3 };
        let (m, p) = small(ObsEncoderConfig::Conv { channels: vec![2, 3] }, spec);
        whole_gradient(&m, p, 18);
    }

    #[test]
    fn batch_matches_single_queries() {
        let (m, p) = small(ObsEncoderConfig::Mlp { hidden: vec![3] }, ObsSpec::Vector(3));
        let seqs = sequences();
        let observations: Vec<Vec<f64>> = (0..5).map(|i| obs(i, 3)).collect();
        let inputs: Vec<Input> =
            (0..5).map(|i| Input { obs: &observations[i], seq: &seqs[i % 3], epsilon_allowed: i == 1 }).collect();
        let (batch, _) = m.forward(&p, &inputs).unwrap();
        let nl = m.num_logits();
        for (i, inp) in inputs.iter().enumerate() {
            let (one, _) = m.forward(&p, std::slice::from_ref(inp)).unwrap();
            assert!((one.values[0] - batch.values[i]).abs() < 1e-12);
            for k in 0..nl {
                let (a, b) = (one.logits[k], batch.logits[i * nl + k]);
                assert!(a == b || (a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn epsilon_slot_is_masked_unless_allowed() {
        let (m, p) = small(ObsEncoderConfig::Mlp { hidden: vec![3] }, ObsSpec::Vector(3));
        let seqs = sequences();
        let o = obs(0, 3);
        let slot = m.epsilon_slot().unwrap();
        for allowed in [false, true] {
            let (out, _) = m.forward(&p, &[Input { obs: &o, seq: &seqs[1], epsilon_allowed: allowed }]).unwrap();
            let pr = dist::probs(&out.logits);
            assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(pr[slot] > 0.0, allowed);
        }
    }

    #[test]
    fn sequence_order_matters() {
        let (m, p) = small(ObsEncoderConfig::Mlp { hidden: vec![3] }, ObsSpec::Vector(3));
        let a = ReachAvoidStep::new(set(&[1]), set(&[2]));
        let b = ReachAvoidStep::new(set(&[2]), set(&[]));
        let ab = m.encode_sequence(&p, &seq(vec![a.clone(), b.clone()]));
        let ba = m.encode_sequence(&p, &seq(vec![b, a]));
        let diff: f64 = ab.iter().zip(&ba).map(|(x, y)| (x - y).abs()).sum();
        assert!(diff > 1e-6);
    }

    #[test]
    fn encode_sequence_agrees_with_forward_value() {
        // the critic sees the same embedding as encode_sequence
        let (m, p) = small(ObsEncoderConfig::Mlp { hidden: vec![3] }, ObsSpec::Vector(3));
        let seqs = sequences();
        let o = obs(2, 3);
        let (out, _) = m.forward(&p, &[Input { obs: &o, seq: &seqs[2], epsilon_allowed: false }]).unwrap();
        let h = m.encode_sequence(&p, &seqs[2]);
        let (feat, _) = m.encode_obs(&p, &[Input { obs: &o, seq: &seqs[2], epsilon_allowed: false }]).unwrap();
        let mut joint = feat;
        joint.extend_from_slice(&h);
        let v = m.critic.forward(&p, joint, 1);
        assert!((v.output()[0] - out.values[0]).abs() < 1e-12);
    }
}
