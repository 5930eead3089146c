use crate::envs::GridEnv;
use crate::error::Result;
use crate::oracle::OracleValue;
use crate::sequences::{Reach, TruncatedSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentAction {
    Env(usize),
    /// Take the ε-jump at the head of the current sequence.
    Epsilon,
}

/// A sequence-conditioned policy with a value estimate.
pub trait Agent {
    fn value(&mut self, env: &GridEnv, seq: &TruncatedSequence) -> f64;

    /// `epsilon_allowed` is false unless the head step is an ε-step whose
    /// gate is open.
    fn act(&mut self, env: &GridEnv, seq: &TruncatedSequence, epsilon_allowed: bool) -> Result<AgentAction>;
}

/// Acts greedily on exact sequence values computed on the tabular dynamics
/// of the current layout.
#[derive(Clone, Debug)]
pub struct OracleAgent {
    pub gamma: f64,
    values: Option<OracleValue>,
}

impl OracleAgent {
    pub fn new(gamma: f64) -> Self {
        OracleAgent { gamma, values: None }
    }

    fn table(&mut self, env: &GridEnv) -> &mut OracleValue {
        let t = env.tabular();
        if self.values.as_ref().is_none_or(|v| v.tabular.labels != t.labels || v.tabular.next != t.next) {
            self.values = Some(OracleValue::new(t, self.gamma));
        }
        self.values.as_mut().unwrap()
    }
}

fn rest(seq: &TruncatedSequence) -> TruncatedSequence {
    TruncatedSequence { steps: seq.steps[1..].to_vec(), k: seq.k }
}

impl Agent for OracleAgent {
    fn value(&mut self, env: &GridEnv, seq: &TruncatedSequence) -> f64 {
        self.table(env).value(env.cell(), seq)
    }

    fn act(&mut self, env: &GridEnv, seq: &TruncatedSequence, epsilon_allowed: bool) -> Result<AgentAction> {
        let head = &seq.steps[0];
        if epsilon_allowed {
            return Ok(AgentAction::Epsilon);
        }
        let after = rest(seq);
        let s = env.cell();
        let values = self.table(env);
        let mut best = (f64::NEG_INFINITY, 0);
        for a in 0..values.tabular.num_actions {
            let score = match values.tabular.next[s][a] {
                None => -1.0,
                Some(s2) => {
                    let l = values.tabular.labels[s2];
                    if head.avoid.contains(l) {
                        -1.0
                    } else {
                        match &head.reach {
                            Reach::Set(r) if r.contains(l) => values.value(s2, &after),
                            _ => values.value(s2, seq),
                        }
                    }
                }
            };
            if score > best.0 {
                best = (score, a);
            }
        }
        Ok(AgentAction::Env(best.1))
    }
}
