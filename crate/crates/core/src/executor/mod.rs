//! Test-time execution of LTL tasks with a sequence-conditioned agent.

mod agent;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use agent::{Agent, AgentAction, OracleAgent};

use crate::automata::Ldba;
use crate::envs::{GridEnv, ProductAction, ProductEnv, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::logic::{Assignment, AssignmentSet};
use crate::oracle::{PolicyTable, ProductMdp, ProductState};
use crate::par::Exec;
use crate::sequences::{
    candidates, strict_negatives_memo, truncate, CyclePath, Reach, ReachAvoidSequence, TruncatedSequence,
    DEFAULT_K, DEFAULT_LAMBDA, DEFAULT_PATH_LIMIT,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reselect {
    #[default]
    OnTransition,
    EveryStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutionConfig {
    /// Strict-negative threshold; infinity disables avoid sets.
    pub lambda: f64,
    pub k: usize,
    pub max_steps: usize,
    pub reselect: Reselect,
    /// Discount for the reported return.
    pub gamma: f64,
    pub path_limit: usize,
    /// When false the first candidate in canonical order is used.
    pub value_selection: bool,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        ExecutionConfig {
            lambda: DEFAULT_LAMBDA,
            k: DEFAULT_K,
            max_steps: 100,
            reselect: Reselect::OnTransition,
            gamma: 0.99,
            path_limit: DEFAULT_PATH_LIMIT,
            value_selection: true,
        }
    }
}

impl ExecutionConfig {
    pub fn check(&self) -> Result<()> {
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Selection {
    /// Index into the candidate list from the selection state.
    pub index: usize,
    pub path: CyclePath,
    /// Avoid sets replaced by their strict negatives.
    pub sequence: ReachAvoidSequence,
    pub truncated: TruncatedSequence,
    pub value: f64,
}

fn restrict(seq: &ReachAvoidSequence, realizable: &AssignmentSet) -> ReachAvoidSequence {
    let mut out = seq.clone();
    for step in &mut out.steps {
        if let Reach::Set(r) = &mut step.reach {
            *r = r.intersection(realizable);
        }
        step.avoid = step.avoid.intersection(realizable);
    }
    out
}

/// Picks the candidate sequence from `q` with the highest value in the
/// current environment state. Reach and avoid sets are restricted to labels
/// that occur in the layout.
pub fn select_sequence(env: &GridEnv, b: &Ldba, q: usize, agent: &mut dyn Agent, cfg: &ExecutionConfig) -> Result<Selection> {
    let cands = candidates(b, q, cfg.path_limit, true)?;
    if cands.is_empty() {
        return Err(Error::Infeasible(q));
    }
    let realizable = env.realizable_labels();
    let considered = if cfg.value_selection { cands.len() } else { 1 };
    let mut best: Option<Selection> = None;
    let mut memo = HashMap::new();
    for (index, cand) in cands.into_iter().take(considered).enumerate() {
        let mut seq = cand.sequence.clone();
        for i in 0..seq.steps.len() {
            let mut value = |t: &TruncatedSequence| agent.value(env, t);
            seq.steps[i].avoid = strict_negatives_memo(&cand.path, i, &mut value, cfg.lambda, b, cfg.k, cfg.path_limit, &mut memo)?;
        }
        let seq = restrict(&seq, &realizable);
        let truncated = truncate(&seq, cfg.k);
        let value = agent.value(env, &truncated);
        if best.as_ref().is_none_or(|s| value > s.value) {
            best = Some(Selection { index, path: cand.path, sequence: seq, truncated, value });
        }
    }
    Ok(best.unwrap())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Violation,
    Timeout,
    Infeasible,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub seed: u64,
    pub success: bool,
    pub outcome: Outcome,
    /// Steps until a trivially accepting state was entered.
    pub steps_to_satisfaction: Option<usize>,
    pub steps: usize,
    pub accepting_visits: usize,
    /// `Σ_t γ^t·1[q_t ∈ F]` over the recorded run.
    pub discounted_return: f64,
    /// Replay of the labels through the automaton agrees with the run.
    pub certified: bool,
    pub trajectory: Vec<TrajectoryRecord>,
}

impl EpisodeReport {
    fn infeasible(seed: u64) -> Self {
        EpisodeReport {
            seed,
            success: false,
            outcome: Outcome::Infeasible,
            steps_to_satisfaction: None,
            steps: 0,
            accepting_visits: 0,
            discounted_return: 0.0,
            certified: true,
            trajectory: Vec::new(),
        }
    }
}

fn label_names(env: &GridEnv, l: Assignment) -> Vec<String> {
    let ab = env.alphabet();
    (0..ab.len()).filter(|&i| l.contains(i)).map(|i| ab.name(i).to_string()).collect()
}

struct Recorder {
    records: Vec<TrajectoryRecord>,
    visits: usize,
    ret: f64,
    gamma: f64,
}

impl Recorder {
    fn push(&mut self, env: &GridEnv, b: &Ldba, action: Option<ProductAction>, q: usize) {
        let t = self.records.len();
        let acc = b.is_accepting(q);
        let reward = if acc { 1.0 } else { 0.0 };
        if acc {
            self.visits += 1;
            self.ret += self.gamma.powi(t as i32);
        }
        let (row, col) = env.position();
        self.records.push(TrajectoryRecord { t, row, col, action, label: label_names(env, env.label()), q, reward });
    }
}

/// Runs one episode of `b` from the start state drawn with `seed`.
///
/// Finite tasks succeed on entering a trivially accepting state. Otherwise
/// a run that times out succeeds when it visited an accepting state and can
/// still reach an accepting cycle.
pub fn run_episode(b: &Arc<Ldba>, env: GridEnv, agent: &mut dyn Agent, cfg: &ExecutionConfig, seed: u64) -> Result<EpisodeReport> {
    cfg.check()?;
    if env.alphabet() != b.alphabet() {
        return Err(Error::Mismatch("automaton and environment alphabets differ".into()));
    }
    let live = b.live_states();
    let mut penv = ProductEnv::new(env, b.clone());
    penv.reset(seed);
    let mut rec = Recorder { records: Vec::new(), visits: 0, ret: 0.0, gamma: cfg.gamma };
    rec.push(&penv.env, b, None, penv.q());
    if !live[b.initial()] {
        return Ok(EpisodeReport::infeasible(seed));
    }
    let mut outcome = Outcome::Timeout;
    let mut satisfied_at = None;
    let mut selection: Option<Selection> = None;
    for t in 0..=cfg.max_steps {
        let q = penv.q();
        if b.is_trivially_accepting(q) {
            outcome = Outcome::Success;
            satisfied_at = Some(t);
            break;
        }
        if !live[q] {
            outcome = Outcome::Violation;
            break;
        }
        if t == cfg.max_steps {
            break;
        }
        if selection.is_none() || cfg.reselect == Reselect::EveryStep {
            selection = Some(select_sequence(&penv.env, b, q, agent, cfg)?);
        }
        let sel = selection.as_ref().unwrap();
        let seq = &sel.truncated;
        let head_eps = seq.steps[0].reach.is_epsilon();
        let gate = head_eps && seq.steps.get(1).is_none_or(|next| !next.avoid.contains(penv.env.label()));
        let action = match agent.act(&penv.env, seq, gate)? {
            AgentAction::Epsilon if gate => ProductAction::Epsilon(sel.path.target(0)),
            AgentAction::Epsilon => return Err(Error::IllegalEpsilon(q)),
            AgentAction::Env(a) => ProductAction::Env(a),
        };
        let step = penv.step(action)?;
        rec.push(&penv.env, b, Some(action), step.q);
        if step.result.terminated {
            outcome = Outcome::Violation;
            break;
        }
        if step.q != q {
            selection = None;
        }
    }
    let q = penv.q();
    let success = match outcome {
        Outcome::Success => true,
        Outcome::Timeout => rec.visits > 0 && live[q],
        _ => false,
    };
    if outcome == Outcome::Timeout && success {
        outcome = Outcome::Success;
    }
    let certified = certify(b, &penv.env, &rec.records, cfg.gamma, rec.visits, rec.ret);
    Ok(EpisodeReport {
        seed,
        success,
        outcome,
        steps_to_satisfaction: satisfied_at,
        steps: rec.records.len() - 1,
        accepting_visits: rec.visits,
        discounted_return: rec.ret,
        certified,
        trajectory: rec.records,
    })
}

/// Replays recorded labels and actions through `b` and checks the automaton
/// states, visit count and return.
pub fn certify(b: &Ldba, env: &GridEnv, records: &[TrajectoryRecord], gamma: f64, visits: usize, ret: f64) -> bool {
    let ab = env.alphabet();
    let label = |names: &[String]| -> Option<Assignment> {
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        ab.assignment(&refs).ok()
    };
    let mut q = b.initial();
    let mut n = 0;
    let mut r = 0.0;
    for (t, rec) in records.iter().enumerate() {
        q = match rec.action {
            None | Some(ProductAction::Env(_)) => match label(&rec.label) {
                Some(l) => b.delta(q, l),
                None => return false,
            },
            Some(ProductAction::Epsilon(target)) => {
                if !b.epsilon(q).contains(&target) {
                    return false;
                }
                target
            }
        };
        if q != rec.q {
            return false;
        }
        if b.is_accepting(q) {
            n += 1;
            r += gamma.powi(t as i32);
        }
    }
    n == visits && (r - ret).abs() <= 1e-9 * r.abs().max(1.0)
}

/// Runs independent episodes for `seeds`, one agent copy per episode.
pub fn evaluate<A>(b: &Arc<Ldba>, env: &GridEnv, agent: &A, cfg: &ExecutionConfig, seeds: &[u64], exec: Exec) -> Result<Vec<EpisodeReport>>
where
    A: Agent + Clone + Send + Sync,
{
    exec.map(seeds, |&seed| {
        let mut a = agent.clone();
        match run_episode(b, env.clone(), &mut a, cfg, seed) {
            Err(Error::Infeasible(_)) => Ok(EpisodeReport::infeasible(seed)),
            r => r,
        }
    })
    .into_iter()
    .collect()
}

/// Executes a memoryless policy of an explicit product built from the
/// environment's tabular dynamics and `b`.
pub fn run_product_policy(
    b: &Arc<Ldba>,
    env: GridEnv,
    product: &ProductMdp,
    policy: &PolicyTable,
    cfg: &ExecutionConfig,
    seed: u64,
) -> Result<EpisodeReport> {
    let PolicyTable::Deterministic(choice) = policy else {
        return Err(Error::Config("product execution needs a deterministic policy".into()));
    };
    let index = product.index();
    let live = b.live_states();
    let mut penv = ProductEnv::new(env, b.clone());
    penv.reset(seed);
    let mut rec = Recorder { records: Vec::new(), visits: 0, ret: 0.0, gamma: cfg.gamma };
    rec.push(&penv.env, b, None, penv.q());
    let mut outcome = Outcome::Timeout;
    for _ in 0..cfg.max_steps {
        let key = ProductState::Pair { s: penv.env.cell(), q: penv.q() };
        let x = *index.get(&key).ok_or_else(|| Error::Mismatch(format!("state {key:?} missing from product")))?;
        let action = product.choices[x][choice[x]].action;
        let step = penv.step(action)?;
        rec.push(&penv.env, b, Some(action), step.q);
        if step.result.terminated {
            outcome = Outcome::Violation;
            break;
        }
    }
    let q = penv.q();
    let success = outcome == Outcome::Timeout && rec.visits > 0 && live[q];
    if success {
        outcome = Outcome::Success;
    } else if outcome == Outcome::Timeout && !live[q] {
        outcome = Outcome::Violation;
    }
    let certified = certify(b, &penv.env, &rec.records, cfg.gamma, rec.visits, rec.ret);
    Ok(EpisodeReport {
        seed,
        success,
        outcome,
        steps_to_satisfaction: None,
        steps: rec.records.len() - 1,
        accepting_visits: rec.visits,
        discounted_return: rec.ret,
        certified,
        trajectory: rec.records,
    })
}
