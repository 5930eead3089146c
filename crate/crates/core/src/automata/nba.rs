//! Tableau translation to Büchi automata and subset + breakpoint
//! limit-determinization.

use std::collections::{BTreeSet, HashMap};

use super::ldba::{LdbaBuilder, StateKind};
use super::Ldba;
use crate::error::{Error, Result};
use crate::graph;
use crate::logic::{Alphabet, Assignment, AssignmentSet, Formula, LassoWord};

/// Nondeterministic Büchi automaton with state-based generalized acceptance.
#[derive(Clone, Debug)]
pub struct Nba {
    pub num_props: usize,
    pub initial: Vec<usize>,
    pub transitions: Vec<Vec<(AssignmentSet, usize)>>,
    pub accepting_sets: Vec<Vec<bool>>,
}

impl Nba {
    pub fn num_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn post(&self, q: usize, a: Assignment) -> impl Iterator<Item = usize> + '_ {
        self.transitions[q].iter().filter(move |(g, _)| g.contains(a)).map(|&(_, t)| t)
    }

    pub fn is_deterministic(&self) -> bool {
        self.initial.len() <= 1
            && (0..self.num_states()).all(|q| {
                (0..1u32 << self.num_props).all(|a| self.post(q, Assignment(a)).count() <= 1)
            })
    }

    /// Counter construction down to a single accepting set.
    pub fn degeneralize(&self) -> Nba {
        let m = self.accepting_sets.len();
        if m == 1 {
            return self.clone();
        }
        if m == 0 {
            let mut n = self.clone();
            n.accepting_sets = vec![vec![true; self.num_states()]];
            return n;
        }
        let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut order: Vec<(usize, usize)> = Vec::new();
        let mut intern = |key: (usize, usize), order: &mut Vec<(usize, usize)>| {
            *ids.entry(key).or_insert_with(|| {
                order.push(key);
                order.len() - 1
            })
        };
        let initial: Vec<usize> = self.initial.iter().map(|&s| intern((s, 0), &mut order)).collect();
        let mut transitions = Vec::new();
        let mut i = 0;
        while i < order.len() {
            let (s, j) = order[i];
            let j2 = if self.accepting_sets[j][s] { (j + 1) % m } else { j };
            let row = self.transitions[s]
                .iter()
                .map(|(g, t)| (g.clone(), intern((*t, j2), &mut order)))
                .collect();
            transitions.push(row);
            i += 1;
        }
        let acc = order.iter().map(|&(s, j)| j == m - 1 && self.accepting_sets[m - 1][s]).collect();
        Nba {
            num_props: self.num_props,
            initial,
            transitions,
            accepting_sets: vec![acc],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Cover {
    pos: u32,
    neg: u32,
    next: BTreeSet<Formula>,
    promised: BTreeSet<usize>,
}

struct Tableau {
    eventualities: Vec<Formula>,
    cache: HashMap<BTreeSet<Formula>, Vec<Cover>>,
}

impl Tableau {
    fn eventuality(&self, f: &Formula) -> usize {
        self.eventualities.iter().position(|e| e == f).expect("collected eventuality")
    }

    fn expand(&mut self, obligations: &BTreeSet<Formula>) -> Vec<Cover> {
        if let Some(c) = self.cache.get(obligations) {
            return c.clone();
        }
        let mut out = BTreeSet::new();
        self.go(obligations.iter().cloned().collect(), Cover::default(), &mut out);
        let v: Vec<Cover> = out.into_iter().collect();
        self.cache.insert(obligations.clone(), v.clone());
        v
    }

    fn go(&self, mut todo: Vec<Formula>, mut cov: Cover, out: &mut BTreeSet<Cover>) {
        use Formula::*;
        while let Some(f) = todo.pop() {
            match &f {
                True => {}
                False => return,
                Prop(p) => {
                    if cov.neg >> p & 1 == 1 {
                        return;
                    }
                    cov.pos |= 1 << p;
                }
                Not(inner) => match **inner {
                    Prop(p) => {
                        if cov.pos >> p & 1 == 1 {
                            return;
                        }
                        cov.neg |= 1 << p;
                    }
                    _ => panic!("tableau input must be in negation normal form"),
                },
                And(a, b) => {
                    todo.push((**a).clone());
                    todo.push((**b).clone());
                }
                Or(a, b) => {
                    let mut left = todo.clone();
                    left.push((**a).clone());
                    self.go(left, cov.clone(), out);
                    todo.push((**b).clone());
                }
                Next(a) => {
                    cov.next.insert((**a).clone());
                }
                Until(a, b) => {
                    let mut now = todo.clone();
                    now.push((**b).clone());
                    self.go(now, cov.clone(), out);
                    todo.push((**a).clone());
                    cov.next.insert(f.clone());
                    cov.promised.insert(self.eventuality(&f));
                }
                Eventually(b) => {
                    let mut now = todo.clone();
                    now.push((**b).clone());
                    self.go(now, cov.clone(), out);
                    cov.next.insert(f.clone());
                    cov.promised.insert(self.eventuality(&f));
                }
                Release(a, b) => {
                    let mut now = todo.clone();
                    now.push((**a).clone());
                    now.push((**b).clone());
                    self.go(now, cov.clone(), out);
                    todo.push((**b).clone());
                    cov.next.insert(f.clone());
                }
                Always(a) => {
                    todo.push((**a).clone());
                    cov.next.insert(f.clone());
                }
            }
        }
        out.insert(cov);
    }
}

fn collect_eventualities(f: &Formula, out: &mut Vec<Formula>) {
    if matches!(f, Formula::Until(..) | Formula::Eventually(_)) && !out.contains(f) {
        out.push(f.clone());
    }
    for c in f.children() {
        collect_eventualities(c, out);
    }
}

/// Tableau translation of an NNF formula, degeneralized before return.
pub fn ltl_to_nba(f: &Formula, num_props: usize, limit: usize) -> Result<Nba> {
    let f = f.to_nnf();
    let mut ev = Vec::new();
    collect_eventualities(&f, &mut ev);
    let mut tab = Tableau { eventualities: ev, cache: HashMap::new() };

    type Key = (BTreeSet<Formula>, BTreeSet<usize>);
    let mut ids: HashMap<Key, usize> = HashMap::new();
    let mut keys: Vec<Key> = Vec::new();
    let start = if f == Formula::True { BTreeSet::new() } else { BTreeSet::from([f.clone()]) };
    let init: Key = (start, BTreeSet::new());
    ids.insert(init.clone(), 0);
    keys.push(init);
    let mut transitions = Vec::new();
    let mut i = 0;
    while i < keys.len() {
        let obligations = keys[i].0.clone();
        let mut row: Vec<(AssignmentSet, usize)> = Vec::new();
        for cov in tab.expand(&obligations) {
            let guard = AssignmentSet::from_fn(num_props, |a| a.0 & cov.pos == cov.pos && a.0 & cov.neg == 0);
            if guard.is_empty() {
                continue;
            }
            let key = (cov.next, cov.promised);
            let t = match ids.get(&key) {
                Some(&t) => t,
                None => {
                    if keys.len() >= limit {
                        return Err(Error::StateLimit(limit));
                    }
                    ids.insert(key.clone(), keys.len());
                    keys.push(key);
                    keys.len() - 1
                }
            };
            match row.iter_mut().find(|(_, x)| *x == t) {
                Some((g, _)) => *g = g.union(&guard),
                None => row.push((guard, t)),
            }
        }
        transitions.push(row);
        i += 1;
    }
    let accepting_sets = (0..tab.eventualities.len())
        .map(|u| keys.iter().map(|(_, p)| !p.contains(&u)).collect())
        .collect();
    Ok(Nba { num_props, initial: vec![0], transitions, accepting_sets }.degeneralize())
}

/// Lasso acceptance for a degeneralized NBA.
pub fn nba_accepts(nba: &Nba, w: &LassoWord) -> bool {
    let len = w.len();
    let n = nba.num_states() * len;
    let node = |q: usize, i: usize| q * len + i;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|x| {
            let (q, i) = (x / len, x % len);
            nba.post(q, w.at(i)).map(|t| node(t, w.succ(i))).collect()
        })
        .collect();
    let reach = graph::reachable(&adj, nba.initial.iter().map(|&q| node(q, 0)));
    let sccs = graph::scc(&adj);
    (0..n).any(|x| {
        reach[x] && nba.accepting_sets.iter().all(|acc| acc[x / len]) && sccs.is_nontrivial(sccs.comp[x], &adj)
    })
}

/// Subset construction for the N-part; breakpoint pairs `(T, B)` seeded
/// with singletons for the D-part.
pub fn nba_to_ldba(nba: &Nba, alphabet: &Alphabet, limit: usize) -> Result<Ldba> {
    assert_eq!(nba.accepting_sets.len(), 1, "nba_to_ldba expects a degeneralized automaton");
    assert_eq!(nba.num_props, alphabet.len());
    let acc = &nba.accepting_sets[0];

    #[derive(Clone, PartialEq, Eq, Hash)]
    enum Key {
        N(Vec<usize>),
        D(Vec<usize>, Vec<usize>),
        Sink,
    }

    let post = |set: &[usize], a: Assignment| -> Vec<usize> {
        let mut v: Vec<usize> = set.iter().flat_map(|&q| nba.post(q, a)).collect();
        v.sort_unstable();
        v.dedup();
        v
    };

    let mut b = LdbaBuilder::new(alphabet.clone());
    let mut ids: HashMap<Key, usize> = HashMap::new();
    let mut keys: Vec<Key> = Vec::new();
    let mut intern = |key: Key, b: &mut LdbaBuilder, keys: &mut Vec<Key>| -> Result<usize> {
        if let Some(&id) = ids.get(&key) {
            return Ok(id);
        }
        if keys.len() >= limit {
            return Err(Error::StateLimit(limit));
        }
        let id = match &key {
            Key::N(s) => b.add_state(StateKind::N, false, format!("{s:?}")),
            Key::D(t, bp) => b.add_state(StateKind::D, !t.is_empty() && t == bp, format!("{t:?} / {bp:?}")),
            Key::Sink => b.add_state(StateKind::D, false, "sink"),
        };
        ids.insert(key.clone(), id);
        keys.push(key);
        Ok(id)
    };

    let mut init = nba.initial.clone();
    init.sort_unstable();
    init.dedup();
    let init_key = if init.is_empty() { Key::Sink } else { Key::N(init) };
    let q0 = intern(init_key, &mut b, &mut keys)?;
    let mut i = 0;
    while i < keys.len() {
        let key = keys[i].clone();
        for a in alphabet.assignments() {
            let next = match &key {
                Key::Sink => Key::Sink,
                Key::N(s) => {
                    let t = post(s, a);
                    if t.is_empty() {
                        Key::Sink
                    } else {
                        Key::N(t)
                    }
                }
                Key::D(t, bp) => {
                    let mut base: Vec<usize> = if bp == t { Vec::new() } else { bp.clone() };
                    base.extend(t.iter().copied().filter(|&q| acc[q]));
                    let t2 = post(t, a);
                    let b2 = post(&base, a);
                    if t2.is_empty() {
                        Key::Sink
                    } else {
                        Key::D(t2, b2)
                    }
                }
            };
            let target = intern(next, &mut b, &mut keys)?;
            b.set(i, a, target);
        }
        if let Key::N(s) = &key {
            for &q in s {
                let target = intern(Key::D(vec![q], Vec::new()), &mut b, &mut keys)?;
                b.add_epsilon(i, target);
            }
        }
        i += 1;
    }
    b.finish(q0).map_err(|e| Error::Mismatch(format!("internal automaton invariant: {e}")))
}
