//! Paths to accepting cycles and the reach-avoid sequences they induce.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::automata::Ldba;
use crate::error::{Error, Result};
use crate::logic::AssignmentSet;

/// Default cap on the number of enumerated paths.
pub const DEFAULT_PATH_LIMIT: usize = 10_000;
/// Default loop repetitions when truncating.
pub const DEFAULT_K: usize = 3;
/// Default strict-negative threshold.
pub const DEFAULT_LAMBDA: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Delta,
    Epsilon,
}

/// Path `states[0] → … → states[m-1]` followed by a closing edge back to
/// `states[loop_start]`. `edges[j]` is the kind of the edge leaving `states[j]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CyclePath {
    pub states: Vec<usize>,
    pub edges: Vec<EdgeKind>,
    pub loop_start: usize,
}

impl CyclePath {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Target of the edge leaving position `j`.
    pub fn target(&self, j: usize) -> usize {
        if j + 1 < self.states.len() {
            self.states[j + 1]
        } else {
            self.states[self.loop_start]
        }
    }
}

/// Distinct moves out of `q`: δ-targets ascending, then ε-targets.
fn moves(b: &Ldba, q: usize) -> Vec<(usize, EdgeKind)> {
    let mut v: Vec<(usize, EdgeKind)> = b.successors(q).into_iter().map(|t| (t, EdgeKind::Delta)).collect();
    v.extend(b.epsilon(q).iter().map(|&t| (t, EdgeKind::Epsilon)));
    v
}

/// All paths from `q` into accepting cycles, found by depth-first search over
/// the current path. A path is recorded when an edge closes a cycle at an
/// index no later than the last accepting state seen on the path.
pub fn accepting_cycle_paths(b: &Ldba, q: usize, limit: usize) -> Result<Vec<CyclePath>> {
    struct Search<'a> {
        b: &'a Ldba,
        path: Vec<usize>,
        edges: Vec<EdgeKind>,
        pos: Vec<Option<usize>>,
        out: Vec<CyclePath>,
        limit: usize,
    }

    impl Search<'_> {
        fn dfs(&mut self, q: usize, last_acc: Option<usize>) -> Result<()> {
            let here = self.path.len();
            let last_acc = if self.b.is_accepting(q) { Some(here) } else { last_acc };
            self.path.push(q);
            self.pos[q] = Some(here);
            for (t, kind) in moves(self.b, q) {
                self.edges.push(kind);
                match self.pos[t] {
                    Some(j) => {
                        if last_acc.is_some_and(|i| j <= i) {
                            if self.out.len() >= self.limit {
                                return Err(Error::PathLimit(self.limit));
                            }
                            self.out.push(CyclePath {
                                states: self.path.clone(),
                                edges: self.edges.clone(),
                                loop_start: j,
                            });
                        }
                    }
                    None => self.dfs(t, last_acc)?,
                }
                self.edges.pop();
            }
            self.pos[q] = None;
            self.path.pop();
            Ok(())
        }
    }

    let mut s = Search {
        b,
        path: Vec::new(),
        edges: Vec::new(),
        pos: vec![None; b.num_states()],
        out: Vec::new(),
        limit,
    };
    s.dfs(q, None)?;
    let mut out = s.out;
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reach {
    Set(AssignmentSet),
    /// Take the ε-jump.
    Epsilon,
}

impl Reach {
    pub fn contains(&self, a: crate::logic::Assignment) -> bool {
        match self {
            Reach::Set(s) => s.contains(a),
            Reach::Epsilon => false,
        }
    }

    pub fn is_epsilon(&self) -> bool {
        matches!(self, Reach::Epsilon)
    }

    pub fn as_set(&self) -> Option<&AssignmentSet> {
        match self {
            Reach::Set(s) => Some(s),
            Reach::Epsilon => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReachAvoidStep {
    pub reach: Reach,
    pub avoid: AssignmentSet,
}

impl ReachAvoidStep {
    pub fn new(reach: AssignmentSet, avoid: AssignmentSet) -> Self {
        ReachAvoidStep { reach: Reach::Set(reach), avoid }
    }

    pub fn epsilon(avoid: AssignmentSet) -> Self {
        ReachAvoidStep { reach: Reach::Epsilon, avoid }
    }

    /// Accepting self-loop on every assignment: nothing left to do.
    pub fn is_trivial(&self) -> bool {
        matches!(&self.reach, Reach::Set(s) if s.is_full()) && self.avoid.is_empty()
    }
}

/// `steps[..loop_start] · steps[loop_start..]^ω`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReachAvoidSequence {
    pub steps: Vec<ReachAvoidStep>,
    pub loop_start: usize,
}

impl ReachAvoidSequence {
    /// The sequence from step `i` on; positions inside the loop rotate it.
    pub fn suffix(&self, i: usize) -> ReachAvoidSequence {
        if i < self.loop_start {
            ReachAvoidSequence { steps: self.steps[i..].to_vec(), loop_start: self.loop_start - i }
        } else {
            let mut steps = self.steps[i..].to_vec();
            steps.extend_from_slice(&self.steps[self.loop_start..i]);
            ReachAvoidSequence { steps, loop_start: 0 }
        }
    }

    pub fn loop_len(&self) -> usize {
        self.steps.len() - self.loop_start
    }
}

/// Finite sequence handed to the policy.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TruncatedSequence {
    pub steps: Vec<ReachAvoidStep>,
    pub k: usize,
}

impl TruncatedSequence {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Reach set `{a : δ(q_j, a) = q_{j+1}}` and avoid set of non-self-loop
/// exits outside the reach set, per path edge.
pub fn path_to_sequence(p: &CyclePath, b: &Ldba) -> ReachAvoidSequence {
    let steps = (0..p.len())
        .map(|j| {
            let q = p.states[j];
            let leave = b.guard(q, q).complement();
            match p.edges[j] {
                EdgeKind::Delta => {
                    let reach = b.guard(q, p.target(j));
                    let avoid = leave.difference(&reach);
                    debug_assert!(!reach.is_empty());
                    ReachAvoidStep::new(reach, avoid)
                }
                EdgeKind::Epsilon => ReachAvoidStep::epsilon(leave),
            }
        })
        .collect();
    ReachAvoidSequence { steps, loop_start: p.loop_start }
}

/// Prefix followed by `k` copies of the loop. A loop that is a single trivial
/// step is dropped unless nothing else remains.
pub fn truncate(s: &ReachAvoidSequence, k: usize) -> TruncatedSequence {
    assert!(k >= 1, "k must be at least 1");
    let prefix = &s.steps[..s.loop_start];
    let cycle = &s.steps[s.loop_start..];
    if cycle.len() == 1 && cycle[0].is_trivial() {
        let steps = if prefix.is_empty() { cycle.to_vec() } else { prefix.to_vec() };
        return TruncatedSequence { steps, k };
    }
    let mut steps = prefix.to_vec();
    for _ in 0..k {
        steps.extend_from_slice(cycle);
    }
    TruncatedSequence { steps, k }
}

/// All candidate sequences from `q`, in canonical path order.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub path: CyclePath,
    pub sequence: ReachAvoidSequence,
}

pub fn candidates(b: &Ldba, q: usize, limit: usize, dedup: bool) -> Result<Vec<Candidate>> {
    let mut out: Vec<Candidate> = accepting_cycle_paths(b, q, limit)?
        .into_iter()
        .map(|path| {
            let sequence = path_to_sequence(&path, b);
            Candidate { path, sequence }
        })
        .collect();
    if dedup {
        let mut seen = std::collections::HashSet::new();
        out.retain(|c| seen.insert(c.sequence.clone()));
    }
    Ok(out)
}

/// Avoid-set members at step `i` of `p` whose successor state loses at least
/// `lambda` of value compared with following `p`. `value` scores a truncated
/// sequence from the current environment state.
pub fn strict_negatives(
    p: &CyclePath,
    i: usize,
    value: &mut dyn FnMut(&TruncatedSequence) -> f64,
    lambda: f64,
    b: &Ldba,
    k: usize,
    limit: usize,
) -> Result<AssignmentSet> {
    strict_negatives_memo(p, i, value, lambda, b, k, limit, &mut HashMap::new())
}

/// As [`strict_negatives`], with the best candidate value of each successor
/// state kept in `memo`. The memo is valid for one environment state.
#[allow(clippy::too_many_arguments)]
pub fn strict_negatives_memo(
    p: &CyclePath,
    i: usize,
    value: &mut dyn FnMut(&TruncatedSequence) -> f64,
    lambda: f64,
    b: &Ldba,
    k: usize,
    limit: usize,
    memo: &mut HashMap<usize, f64>,
) -> Result<AssignmentSet> {
    let seq = path_to_sequence(p, b);
    let avoid = seq.steps[i].avoid.clone();
    if lambda.is_infinite() || avoid.is_empty() {
        return Ok(AssignmentSet::empty(b.num_props()));
    }
    let current = value(&truncate(&seq.suffix(i), k));
    let q = p.states[i];
    let mut targets: Vec<usize> = avoid.iter().map(|a| b.delta(q, a)).collect();
    targets.sort_unstable();
    targets.dedup();
    let mut strict = AssignmentSet::empty(b.num_props());
    for t in targets {
        let best = match memo.get(&t) {
            Some(&v) => v,
            None => {
                let mut best = f64::NEG_INFINITY;
                for c in candidates(b, t, limit, true)? {
                    best = best.max(value(&truncate(&c.sequence, k)));
                }
                memo.insert(t, best);
                best
            }
        };
        if current - best >= lambda {
            for a in avoid.iter().filter(|&a| b.delta(q, a) == t) {
                strict.insert(a);
            }
        }
    }
    Ok(strict)
}
