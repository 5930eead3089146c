use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curriculum::{sample_sequence, Curriculum, CurriculumState, EpisodeProgress, TaskOutcome};
use super::dist;
use super::model::{Input, Model, ModelConfig, ObsEncoderConfig};
use super::nn::ParamLayout;
use super::ppo::{gae, ppo_update, Adam, Batch, PpoConfig, UpdateStats};
use crate::envs::{EnvConfig, FlatWorldConfig, GridEnv, LetterWorldConfig, ObsSpec};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::sequences::{truncate, TruncatedSequence};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub model: ModelConfig,
    pub ppo: PpoConfig,
    pub curriculum: Curriculum,
    pub total_steps: usize,
    /// Episode cap; the environment default when absent.
    #[serde(default)]
    pub episode_cap: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub exec: Exec,
}

impl TrainConfig {
    pub fn letter_world() -> Self {
        TrainConfig {
            env: EnvConfig::LetterWorld(LetterWorldConfig::default()),
            model: ModelConfig::letter_world(),
            ppo: PpoConfig::letter_world(),
            curriculum: Curriculum::letter_world(),
            total_steps: 15_000_000,
            episode_cap: None,
            seed: 0,
            exec: Exec::Parallel,
        }
    }

    /// Fixed 5×5 LetterWorld with four letters and a narrower network, sized
    /// for a single CPU core.
    pub fn letter_world_small() -> Self {
        let env = LetterWorldConfig {
            size: 5,
            num_letters: 4,
            copies_per_letter: 1,
            fixed_layout: true,
            layout_seed: 7,
            layout: None,
        };
        let model = ModelConfig {
            obs_encoder: ObsEncoderConfig::Conv { channels: vec![8, 16, 16] },
            phi_dim: 16,
            rho: vec![32, 16],
            gru_hidden: 32,
            ..ModelConfig::letter_world()
        };
        TrainConfig {
            env: EnvConfig::LetterWorld(env),
            model,
            ppo: PpoConfig { workers: 8, epochs: 4, ..PpoConfig::letter_world() },
            curriculum: Curriculum::letter_world(),
            total_steps: 1_000_000,
            episode_cap: Some(50),
            seed: 0,
            exec: Exec::Parallel,
        }
    }

    pub fn flat_world() -> Self {
        TrainConfig {
            env: EnvConfig::FlatWorld(FlatWorldConfig::default()),
            model: ModelConfig::flat_world(),
            ppo: PpoConfig::flat_world(),
            curriculum: Curriculum::flat_world(),
            total_steps: 15_000_000,
            episode_cap: None,
            seed: 0,
            exec: Exec::Parallel,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.ppo.check()?;
        self.curriculum.check()?;
        if self.episode_cap == Some(0) {
            return Err(Error::Config("episode cap must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub update: usize,
    pub steps: usize,
    pub stage: usize,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
}

/// Parameters with everything needed to rebuild the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: ModelConfig,
    pub obs: ObsSpec,
    pub num_props: usize,
    pub num_actions: usize,
    pub layout: ParamLayout,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub const VERSION: u32 = 1;

    pub fn new(model: &Model, obs: ObsSpec, params: Vec<f64>) -> Self {
        Checkpoint {
            version: Self::VERSION,
            model: model.config.clone(),
            obs,
            num_props: model.num_props,
            num_actions: model.num_actions,
            layout: model.layout.clone(),
            params,
        }
    }

    pub fn model(&self) -> Result<Model> {
        if self.version != Self::VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", self.version)));
        }
        let m = Model::new(self.model.clone(), self.obs, self.num_props, self.num_actions)?;
        if m.layout != self.layout || self.params.len() != m.num_params() {
            return Err(Error::Shape("checkpoint layout does not match its model".into()));
        }
        if self.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(m)
    }
}

pub struct Trained {
    pub model: Model,
    pub params: Vec<f64>,
    pub log: Vec<LogRow>,
    pub stage: usize,
}

impl Trained {
    pub fn checkpoint(&self, obs: ObsSpec) -> Checkpoint {
        Checkpoint::new(&self.model, obs, self.params.clone())
    }
}

struct Worker {
    env: GridEnv,
    rng: ChaCha8Rng,
    progress: EpisodeProgress,
    seq: Arc<TruncatedSequence>,
    obs: Vec<f64>,
    t: usize,
    ret: f64,
    last: Option<Result<(f64, bool)>>,
}

impl Worker {
    fn step(&mut self, a: usize, cap: usize) -> Result<(f64, bool)> {
        let r = self.env.step(a)?;
        self.obs = r.observation;
        self.t += 1;
        let (reward, done) = if r.terminated {
            self.progress.outcome = Some(TaskOutcome::Violation);
            (-1.0, true)
        } else {
            self.progress.progress_and_reward(r.label)
        };
        if !done && self.t >= cap {
            self.progress.timeout();
            return Ok((reward, true));
        }
        Ok((reward, done))
    }

    fn start(&mut self, curriculum: &Curriculum, stage: usize) {
        let seed = self.rng.random();
        self.obs = self.env.reset(seed);
        let realizable = self.env.realizable_labels();
        let n = self.env.alphabet().len();
        let s = sample_sequence(&curriculum.stages[stage], n, &realizable, &mut self.rng);
        self.progress = EpisodeProgress::new(truncate(&s, 1));
        self.seq = Arc::new(self.progress.remaining());
        self.t = 0;
        self.ret = 0.0;
    }
}

/// Proximal policy optimisation over random reach-avoid tasks from a
/// curriculum. `on_update` sees every log row as it is produced.
pub fn train(cfg: &TrainConfig, mut on_update: impl FnMut(&LogRow)) -> Result<Trained> {
    cfg.check()?;
    let env = cfg.env.build()?;
    let model = Model::new(cfg.model.clone(), env.obs_spec(), env.alphabet().len(), env.num_actions())?;
    let mut params = model.init(cfg.seed);
    let mut adam = Adam::new(params.len(), cfg.ppo.lr, cfg.ppo.adam_eps);
    let mut learner_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let cap = cfg.episode_cap.unwrap_or_else(|| cfg.env.default_episode_cap());
    let ppo = &cfg.ppo;
    let mut curriculum = CurriculumState::default();
    let mut workers: Vec<Worker> = (0..ppo.workers)
        .map(|w| Worker {
            env: env.clone(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(1000).wrapping_add(w as u64 + 1)),
            progress: EpisodeProgress::new(TruncatedSequence { steps: Vec::new(), k: 1 }),
            seq: Arc::new(TruncatedSequence { steps: Vec::new(), k: 1 }),
            obs: Vec::new(),
            t: 0,
            ret: 0.0,
            last: None,
        })
        .collect();
    for w in &mut workers {
        w.start(&cfg.curriculum, 0);
    }
    let mut log = Vec::new();
    let mut steps = 0;
    let mut update = 0;
    while steps < cfg.total_steps {
        let t_len = ppo.steps_per_worker;
        let n_w = workers.len();
        // per worker: rewards, dones, values
        let mut rewards = vec![vec![0.0; t_len]; n_w];
        let mut dones = vec![vec![false; t_len]; n_w];
        let mut values = vec![vec![0.0; t_len]; n_w];
        let mut batch = Batch::default();
        let mut slots = vec![vec![0usize; t_len]; n_w];
        let mut finished: Vec<(bool, f64)> = Vec::new();
        for t in 0..t_len {
            let inputs: Vec<Input> =
                workers.iter().map(|w| Input { obs: &w.obs, seq: &w.seq, epsilon_allowed: false }).collect();
            let (out, _) = model.forward(&params, &inputs)?;
            let n_logits = model.num_logits();
            let mut actions = Vec::with_capacity(n_w);
            for (i, w) in workers.iter_mut().enumerate() {
                let logits = &out.logits[i * n_logits..(i + 1) * n_logits];
                if logits.iter().any(|v| v.is_nan()) || !out.values[i].is_finite() {
                    return Err(Error::NonFinite("policy output".into()));
                }
                let a = dist::sample(logits, &mut w.rng);
                slots[i][t] = batch.len();
                batch.obs.push(w.obs.clone());
                batch.seqs.push(w.seq.clone());
                batch.epsilon_allowed.push(false);
                batch.actions.push(a);
                batch.log_probs.push(dist::log_softmax(logits)[a]);
                values[i][t] = out.values[i];
                actions.push(a);
            }
            cfg.exec.for_each_mut(&mut workers, |i, w| w.last = Some(w.step(actions[i], cap)));
            for (i, w) in workers.iter_mut().enumerate() {
                let (reward, done) = w.last.take().unwrap()?;
                w.ret += ppo.gamma.powi(w.t as i32 - 1) * reward;
                rewards[i][t] = reward;
                dones[i][t] = done;
                if done {
                    let ok = w.progress.outcome == Some(TaskOutcome::Success);
                    finished.push((ok, w.ret));
                    curriculum.record(ok, &cfg.curriculum);
                    w.start(&cfg.curriculum, curriculum.stage);
                } else if w.progress.remaining().len() != w.seq.len() {
                    w.seq = Arc::new(w.progress.remaining());
                }
            }
        }
        let inputs: Vec<Input> = workers.iter().map(|w| Input { obs: &w.obs, seq: &w.seq, epsilon_allowed: false }).collect();
        let (last, _) = model.forward(&params, &inputs)?;
        batch.advantages = vec![0.0; batch.len()];
        batch.returns = vec![0.0; batch.len()];
        for i in 0..n_w {
            let (adv, ret) = gae(&rewards[i], &values[i], &dones[i], last.values[i], ppo.gamma, ppo.gae_lambda);
            for t in 0..t_len {
                batch.advantages[slots[i][t]] = adv[t];
                batch.returns[slots[i][t]] = ret[t];
            }
        }
        let stats: UpdateStats = ppo_update(&model, &mut params, &mut adam, &batch, ppo, &mut learner_rng, cfg.exec)?;
        steps += t_len * n_w;
        let episodes = finished.len();
        let row = LogRow {
            update,
            steps,
            stage: curriculum.stage,
            episodes,
            success_rate: if episodes > 0 { finished.iter().filter(|e| e.0).count() as f64 / episodes as f64 } else { 0.0 },
            mean_return: if episodes > 0 { finished.iter().map(|e| e.1).sum::<f64>() / episodes as f64 } else { 0.0 },
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            grad_norm: stats.grad_norm,
        };
        curriculum.maybe_advance(&cfg.curriculum);
        on_update(&row);
        log.push(row);
        update += 1;
    }
    Ok(Trained { model, params, log, stage: curriculum.stage })
}

/// Success rate of the policy on `tasks`, one episode per task from a
/// start drawn with the matching seed.
pub fn evaluate_tasks(
    model: &Model,
    params: &[f64],
    env: &GridEnv,
    tasks: &[TruncatedSequence],
    cap: usize,
    greedy: bool,
    seed: u64,
    exec: Exec,
) -> Result<f64> {
    let results = exec.map_range(tasks.len(), |i| -> Result<bool> {
        let mut env = env.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut obs = env.reset(rng.random());
        let mut prog = EpisodeProgress::new(tasks[i].clone());
        for _ in 0..cap {
            let seq = prog.remaining();
            let (out, _) = model.forward(params, &[Input { obs: &obs, seq: &seq, epsilon_allowed: false }])?;
            let a = if greedy { dist::argmax(&out.logits) } else { dist::sample(&out.logits, &mut rng) };
            let r = env.step(a)?;
            obs = r.observation;
            if r.terminated {
                return Ok(false);
            }
            if prog.progress_and_reward(r.label).1 {
                return Ok(prog.outcome == Some(TaskOutcome::Success));
            }
        }
        Ok(false)
    });
    let ok = results.into_iter().collect::<Result<Vec<bool>>>()?;
    Ok(ok.iter().filter(|&&b| b).count() as f64 / ok.len().max(1) as f64)
}
