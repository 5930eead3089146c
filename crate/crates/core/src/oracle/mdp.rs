use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::automata::{Ldba, LdbaBuilder, StateKind};
use crate::envs::{ProductAction, Tabular};
use crate::error::{Error, Result};
use crate::logic::{Alphabet, Assignment};

pub const DEFAULT_PRODUCT_LIMIT: usize = 1_000_000;

/// Finite MDP with labelled states. States flagged in `failure` end the
/// episode: in a product they collapse into one rejecting absorbing state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExplicitMdp {
    /// `transitions[s][a]` is a distribution over successors.
    pub transitions: Vec<Vec<Vec<(usize, f64)>>>,
    pub initial: Vec<(usize, f64)>,
    pub labels: Vec<Assignment>,
    pub failure: Vec<bool>,
}

impl ExplicitMdp {
    pub fn num_states(&self) -> usize {
        self.transitions.len()
    }

    /// Deterministic grid dynamics; terminating moves lead to an extra
    /// failure state appended at the end.
    pub fn from_tabular(t: &Tabular) -> Self {
        let fail = t.num_states;
        let mut transitions: Vec<Vec<Vec<(usize, f64)>>> = t
            .next
            .iter()
            .map(|row| row.iter().map(|n| vec![(n.unwrap_or(fail), 1.0)]).collect())
            .collect();
        transitions.push(vec![vec![(fail, 1.0)]]);
        let mut labels = t.labels.clone();
        labels.push(Assignment::EMPTY);
        let mut failure = vec![false; t.num_states];
        failure.push(true);
        let p = 1.0 / t.starts.len() as f64;
        ExplicitMdp {
            transitions,
            initial: t.starts.iter().map(|&s| (s, p)).collect(),
            labels,
            failure,
        }
    }

    pub fn check(&self) -> Result<()> {
        for (s, row) in self.transitions.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::Config(format!("state {s} has no actions")));
            }
            for dist in row {
                let total: f64 = dist.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-12 || dist.iter().any(|&(t, p)| t >= self.num_states() || p < 0.0) {
                    return Err(Error::Config(format!("state {s}: transition row is not a distribution")));
                }
            }
        }
        let total: f64 = self.initial.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config("initial distribution does not sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProductState {
    Pair { s: usize, q: usize },
    Failure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Choice {
    pub action: ProductAction,
    pub next: Vec<(usize, f64)>,
}

/// Explicit product, or any finite MDP with accepting marks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductMdp {
    pub states: Vec<ProductState>,
    pub choices: Vec<Vec<Choice>>,
    pub accepting: Vec<bool>,
    pub initial: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PolicyTable {
    Deterministic(Vec<usize>),
    Stochastic(Vec<Vec<f64>>),
}

impl PolicyTable {
    pub fn probs(&self, x: usize, n: usize) -> Vec<f64> {
        match self {
            PolicyTable::Deterministic(c) => {
                let mut v = vec![0.0; n];
                v[c[x]] = 1.0;
                v
            }
            PolicyTable::Stochastic(rows) => rows[x].clone(),
        }
    }
}

impl ProductMdp {
    pub fn num_states(&self) -> usize {
        self.choices.len()
    }

    pub fn index(&self) -> HashMap<ProductState, usize> {
        self.states.iter().enumerate().map(|(i, &s)| (s, i)).collect()
    }

    pub fn check(&self) -> Result<()> {
        for (x, cs) in self.choices.iter().enumerate() {
            if cs.is_empty() {
                return Err(Error::Config(format!("product state {x} has no choices")));
            }
            for c in cs {
                let total: f64 = c.next.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Config(format!("product state {x}: row sums to {total}")));
                }
            }
        }
        Ok(())
    }

    /// Markov chain induced by a memoryless policy.
    pub fn chain(&self, pi: &PolicyTable) -> Vec<Vec<(usize, f64)>> {
        (0..self.num_states())
            .map(|x| {
                let probs = pi.probs(x, self.choices[x].len());
                let mut row: HashMap<usize, f64> = HashMap::new();
                for (c, &w) in self.choices[x].iter().zip(&probs) {
                    if w > 0.0 {
                        for &(t, p) in &c.next {
                            *row.entry(t).or_insert(0.0) += w * p;
                        }
                    }
                }
                let mut row: Vec<(usize, f64)> = row.into_iter().collect();
                row.sort_by_key(|&(t, _)| t);
                row
            })
            .collect()
    }

    /// Number of deterministic memoryless policies, saturating.
    pub fn policy_count(&self) -> u128 {
        self.choices.iter().fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128))
    }
}

/// Reachable part of the product. The automaton reads the label of every
/// state on arrival, and of the start state from its initial state.
pub fn build_product(m: &ExplicitMdp, b: &Ldba, limit: usize) -> Result<ProductMdp> {
    m.check()?;
    let mut index: HashMap<ProductState, usize> = HashMap::new();
    let mut states: Vec<ProductState> = Vec::new();
    let mut intern = |st: ProductState, states: &mut Vec<ProductState>| -> Result<usize> {
        if let Some(&i) = index.get(&st) {
            return Ok(i);
        }
        if states.len() >= limit {
            return Err(Error::StateLimit(limit));
        }
        index.insert(st, states.len());
        states.push(st);
        Ok(states.len() - 1)
    };
    let enter = |s: usize, q_from: usize| -> ProductState {
        if m.failure[s] {
            ProductState::Failure
        } else {
            ProductState::Pair { s, q: b.delta(q_from, m.labels[s]) }
        }
    };
    let mut initial = Vec::new();
    for &(s, p) in &m.initial {
        let x = intern(enter(s, b.initial()), &mut states)?;
        initial.push((x, p));
    }
    let mut choices = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let row = match states[i] {
            ProductState::Failure => vec![Choice { action: ProductAction::Env(0), next: vec![(i, 1.0)] }],
            ProductState::Pair { s, q } => {
                let mut row = Vec::new();
                for (a, dist) in m.transitions[s].iter().enumerate() {
                    let mut next: Vec<(usize, f64)> = Vec::new();
                    for &(t, p) in dist {
                        let x = intern(enter(t, q), &mut states)?;
                        match next.iter_mut().find(|(y, _)| *y == x) {
                            Some(e) => e.1 += p,
                            None => next.push((x, p)),
                        }
                    }
                    row.push(Choice { action: ProductAction::Env(a), next });
                }
                for &t in b.epsilon(q) {
                    let x = intern(ProductState::Pair { s, q: t }, &mut states)?;
                    row.push(Choice { action: ProductAction::Epsilon(t), next: vec![(x, 1.0)] });
                }
                row
            }
        };
        choices.push(row);
        i += 1;
    }
    let accepting = states
        .iter()
        .map(|st| matches!(st, ProductState::Pair { q, .. } if b.is_accepting(*q)))
        .collect();
    Ok(ProductMdp { states, choices, accepting, initial })
}

#[derive(Clone, Debug)]
pub struct ValueIteration {
    pub values: Vec<f64>,
    pub policy: PolicyTable,
    pub iterations: usize,
    /// Sup-norm residual after each sweep.
    pub residuals: Vec<f64>,
}

impl ValueIteration {
    /// Expected return from the initial distribution.
    pub fn initial_value(&self, p: &ProductMdp) -> f64 {
        p.initial.iter().map(|&(x, w)| w * self.values[x]).sum()
    }
}

fn backup(p: &ProductMdp, v: &[f64], c: &Choice, gamma: f64) -> f64 {
    c.next
        .iter()
        .map(|&(t, pr)| pr * (if p.accepting[t] { 1.0 } else { 0.0 } + gamma * v[t]))
        .sum()
}

/// Value iteration for reward `1[next state accepting]`, discounted every
/// step. Stops when the sup-norm error bound falls below 1e-10.
pub fn optimal_value_iteration(p: &ProductMdp, gamma: f64) -> Result<ValueIteration> {
    assert!(gamma > 0.0 && gamma < 1.0);
    let n = p.num_states();
    let mut v = vec![0.0; n];
    let mut residuals = Vec::new();
    let max_iter = 10_000_000 / n.max(1) + 100_000;
    for it in 1..=max_iter {
        let mut res: f64 = 0.0;
        let mut next = vec![0.0; n];
        for x in 0..n {
            let best = p.choices[x]
                .iter()
                .map(|c| backup(p, &v, c, gamma))
                .fold(f64::NEG_INFINITY, f64::max);
            res = res.max((best - v[x]).abs());
            next[x] = best;
        }
        v = next;
        residuals.push(res);
        if res * gamma / (1.0 - gamma) < 1e-10 || res == 0.0 {
            let policy = (0..n)
                .map(|x| {
                    let vals: Vec<f64> = p.choices[x].iter().map(|c| backup(p, &v, c, gamma)).collect();
                    let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    vals.iter().position(|&q| q >= best - 1e-12).unwrap()
                })
                .collect();
            return Ok(ValueIteration {
                values: v,
                policy: PolicyTable::Deterministic(policy),
                iterations: it,
                residuals,
            });
        }
    }
    Err(Error::NoConvergence(max_iter))
}

/// Exact standard-discounted value of a fixed policy by a linear solve.
pub fn policy_value(p: &ProductMdp, pi: &PolicyTable, gamma: f64) -> Result<Vec<f64>> {
    let chain = p.chain(pi);
    let n = p.num_states();
    let mut a = nalgebra::DMatrix::<f64>::identity(n, n);
    let mut r = nalgebra::DVector::<f64>::zeros(n);
    for (x, row) in chain.iter().enumerate() {
        for &(t, pr) in row {
            a[(x, t)] -= gamma * pr;
            if p.accepting[t] {
                r[x] += pr;
            }
        }
    }
    let sol = a.lu().solve(&r).ok_or_else(|| Error::NonFinite("singular policy evaluation system".into()))?;
    Ok(sol.iter().copied().collect())
}

/// The product from the eventual-discounting counterexample: from `s0`,
/// action `a` enters a two-state cycle through an accepting state, action
/// `b` reaches an accepting self-loop with probability 0.99 and a rejecting
/// sink otherwise.
pub fn fig6() -> (ExplicitMdp, Ldba) {
    let acc = Assignment(1);
    let none = Assignment::EMPTY;
    // s0, s1, s2, s3, sink
    let mdp = ExplicitMdp {
        transitions: vec![
            vec![vec![(1, 1.0)], vec![(3, 0.99), (4, 0.01)]],
            vec![vec![(2, 1.0)]],
            vec![vec![(1, 1.0)]],
            vec![vec![(3, 1.0)]],
            vec![vec![(4, 1.0)]],
        ],
        initial: vec![(0, 1.0)],
        labels: vec![none, acc, none, acc, none],
        failure: vec![false; 5],
    };
    // deterministic automaton for G F acc: remembers whether acc was just seen
    let alphabet = Alphabet::new(["acc"]).unwrap();
    let mut b = LdbaBuilder::new(alphabet);
    let seen = b.add_state(StateKind::D, true, "seen");
    let wait = b.add_state(StateKind::D, false, "wait");
    for q in [seen, wait] {
        b.set(q, acc, seen);
        b.set(q, none, wait);
    }
    (mdp, b.finish(wait).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig6_standard_discounting() {
        let (m, b) = fig6();
        let p = build_product(&m, &b, 100).unwrap();
        assert_eq!(p.num_states(), 5);
        assert_eq!(p.accepting.iter().filter(|&&a| a).count(), 2);
        let s0 = p.initial[0].0;
        for gamma in [0.5, 0.9, 0.99] {
            let mut pa = vec![0; 5];
            pa[s0] = 0;
            let va = policy_value(&p, &PolicyTable::Deterministic(pa.clone()), gamma).unwrap();
            assert!((va[s0] - 1.0 / (1.0 - gamma * gamma)).abs() < 1e-9);
            pa[s0] = 1;
            let vb = policy_value(&p, &PolicyTable::Deterministic(pa), gamma).unwrap();
            assert!((vb[s0] - 0.99 / (1.0 - gamma)).abs() < 1e-9);
        }
        let vi = optimal_value_iteration(&p, 0.9).unwrap();
        assert_eq!(vi.policy, PolicyTable::Deterministic(vec![1, 0, 0, 0, 0]));
        assert!((vi.values[s0] - 9.9).abs() < 1e-8);
    }

    #[test]
    fn residuals_decrease() {
        let (m, b) = fig6();
        let p = build_product(&m, &b, 100).unwrap();
        let vi = optimal_value_iteration(&p, 0.9).unwrap();
        assert!(vi.residuals.windows(2).all(|w| w[1] <= w[0]));
    }
}
