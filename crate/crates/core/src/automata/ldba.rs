use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::logic::{Alphabet, Assignment, AssignmentSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StateKind {
    /// Initial, nondeterministic part (source of ε-jumps).
    N,
    /// Deterministic accepting part.
    D,
}

/// Limit-deterministic Büchi automaton with a total deterministic transition
/// function, ε-jumps from the N-part into the D-part, and state-based
/// acceptance inside the D-part.
#[derive(Clone, Debug, PartialEq)]
pub struct Ldba {
    alphabet: Alphabet,
    initial: usize,
    delta: Vec<Vec<u32>>,
    accepting: Vec<bool>,
    kind: Vec<StateKind>,
    epsilon: Vec<Vec<usize>>,
    names: Vec<String>,
}

/// Incremental construction; `finish` validates the structure.
#[derive(Clone, Debug)]
pub struct LdbaBuilder {
    alphabet: Alphabet,
    delta: Vec<Vec<u32>>,
    accepting: Vec<bool>,
    kind: Vec<StateKind>,
    epsilon: Vec<Vec<usize>>,
    names: Vec<String>,
}

const UNSET: u32 = u32::MAX;

impl LdbaBuilder {
    pub fn new(alphabet: Alphabet) -> Self {
        LdbaBuilder {
            alphabet,
            delta: Vec::new(),
            accepting: Vec::new(),
            kind: Vec::new(),
            epsilon: Vec::new(),
            names: Vec::new(),
        }
    }

    pub fn add_state(&mut self, kind: StateKind, accepting: bool, name: impl Into<String>) -> usize {
        self.delta.push(vec![UNSET; self.alphabet.num_assignments()]);
        self.accepting.push(accepting);
        self.kind.push(kind);
        self.epsilon.push(Vec::new());
        self.names.push(name.into());
        self.delta.len() - 1
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn set(&mut self, q: usize, a: Assignment, target: usize) {
        self.delta[q][a.index()] = target as u32;
    }

    pub fn set_all(&mut self, q: usize, guard: &AssignmentSet, target: usize) {
        for a in guard.iter() {
            self.set(q, a, target);
        }
    }

    pub fn add_epsilon(&mut self, from: usize, to: usize) {
        if !self.epsilon[from].contains(&to) {
            self.epsilon[from].push(to);
        }
    }

    /// Validates and returns the automaton. Undefined transitions go to a
    /// fresh rejecting sink.
    pub fn finish(mut self, initial: usize) -> Result<Ldba, String> {
        let missing = self.delta.iter().any(|row| row.contains(&UNSET));
        if missing {
            let sink = self.add_state(StateKind::D, false, "sink");
            for row in &mut self.delta {
                for t in row.iter_mut() {
                    if *t == UNSET {
                        *t = sink as u32;
                    }
                }
            }
        }
        for e in &mut self.epsilon {
            e.sort_unstable();
        }
        let b = Ldba {
            alphabet: self.alphabet,
            initial,
            delta: self.delta,
            accepting: self.accepting,
            kind: self.kind,
            epsilon: self.epsilon,
            names: self.names,
        };
        b.check()?;
        Ok(b)
    }
}

impl Ldba {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_props(&self) -> usize {
        self.alphabet.len()
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn delta(&self, q: usize, a: Assignment) -> usize {
        self.delta[q][a.index()] as usize
    }

    pub fn row(&self, q: usize) -> &[u32] {
        &self.delta[q]
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn kind(&self, q: usize) -> StateKind {
        self.kind[q]
    }

    pub fn epsilon(&self, q: usize) -> &[usize] {
        &self.epsilon[q]
    }

    pub fn name(&self, q: usize) -> &str {
        &self.names[q]
    }

    pub fn num_accepting(&self) -> usize {
        self.accepting.iter().filter(|&&x| x).count()
    }

    pub fn num_epsilon(&self) -> usize {
        self.epsilon.iter().map(Vec::len).sum()
    }

    pub fn n_states(&self) -> Vec<usize> {
        (0..self.num_states()).filter(|&q| self.kind[q] == StateKind::N).collect()
    }

    /// Assignments leading from `q` to `target`.
    pub fn guard(&self, q: usize, target: usize) -> AssignmentSet {
        AssignmentSet::from_fn(self.num_props(), |a| self.delta(q, a) == target)
    }

    /// Distinct δ-successors of `q` in increasing order.
    pub fn successors(&self, q: usize) -> Vec<usize> {
        let mut s: Vec<usize> = self.delta[q].iter().map(|&t| t as usize).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Every assignment loops, no ε-jumps, not accepting.
    pub fn is_sink(&self, q: usize) -> bool {
        !self.accepting[q] && self.epsilon[q].is_empty() && self.delta[q].iter().all(|&t| t as usize == q)
    }

    /// Accepting state whose every assignment loops back to itself.
    pub fn is_trivially_accepting(&self, q: usize) -> bool {
        self.accepting[q] && self.delta[q].iter().all(|&t| t as usize == q)
    }

    pub fn sinks(&self) -> Vec<usize> {
        (0..self.num_states()).filter(|&q| self.is_sink(q)).collect()
    }

    /// Adjacency over δ and ε edges.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.num_states())
            .map(|q| {
                let mut s = self.successors(q);
                s.extend_from_slice(&self.epsilon[q]);
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect()
    }

    /// States from which some accepting cycle is reachable.
    pub fn live_states(&self) -> Vec<bool> {
        let adj = self.adjacency();
        let sccs = crate::graph::scc(&adj);
        let mut good = vec![false; sccs.count()];
        for c in 0..sccs.count() {
            good[c] = sccs.is_nontrivial(c, &adj) && sccs.members[c].iter().any(|&q| self.accepting[q]);
        }
        // components are in reverse topological order, successors come first
        let mut live_comp = good.clone();
        for c in 0..sccs.count() {
            if live_comp[c] {
                continue;
            }
            live_comp[c] = sccs.members[c]
                .iter()
                .any(|&q| adj[q].iter().any(|&v| sccs.comp[v] != c && live_comp[sccs.comp[v]]));
        }
        (0..self.num_states()).map(|q| live_comp[sccs.comp[q]]).collect()
    }

    /// Structural invariants: δ total, D closed under δ, ε only N→D, F ⊆ Q_D.
    pub fn check(&self) -> Result<(), String> {
        let n = self.num_states();
        if self.initial >= n {
            return Err(format!("initial state {} out of range", self.initial));
        }
        for q in 0..n {
            if self.delta[q].len() != self.alphabet.num_assignments() {
                return Err(format!("state {q}: transition row has wrong width"));
            }
            for &t in &self.delta[q] {
                if t as usize >= n {
                    return Err(format!("state {q}: transition to undefined state {t}"));
                }
                if self.kind[q] == StateKind::D && self.kind[t as usize] != StateKind::D {
                    return Err(format!("state {q}: δ edge leaves the D-part"));
                }
            }
            if self.accepting[q] && self.kind[q] != StateKind::D {
                return Err(format!("state {q}: accepting state outside the D-part"));
            }
            for &t in &self.epsilon[q] {
                if self.kind[q] != StateKind::N || t >= n || self.kind[t] != StateKind::D {
                    return Err(format!("ε edge {q}->{t} is not N->D"));
                }
            }
        }
        Ok(())
    }

    /// Restricts to states reachable from the initial state, renumbered in
    /// breadth-first order (assignments ascending, then ε-targets).
    pub fn reachable(&self) -> Ldba {
        let n = self.num_states();
        let mut order = Vec::new();
        let mut map = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        map[self.initial] = 0;
        order.push(self.initial);
        queue.push_back(self.initial);
        while let Some(q) = queue.pop_front() {
            let succ = self.delta[q].iter().map(|&t| t as usize).chain(self.epsilon[q].iter().copied());
            for t in succ {
                if map[t] == usize::MAX {
                    map[t] = order.len();
                    order.push(t);
                    queue.push_back(t);
                }
            }
        }
        let mut eps: Vec<Vec<usize>> = order
            .iter()
            .map(|&q| self.epsilon[q].iter().map(|&t| map[t]).collect())
            .collect();
        for e in &mut eps {
            e.sort_unstable();
        }
        Ldba {
            alphabet: self.alphabet.clone(),
            initial: 0,
            delta: order
                .iter()
                .map(|&q| self.delta[q].iter().map(|&t| map[t as usize] as u32).collect())
                .collect(),
            accepting: order.iter().map(|&q| self.accepting[q]).collect(),
            kind: order.iter().map(|&q| self.kind[q]).collect(),
            epsilon: eps,
            names: order.iter().map(|&q| self.names[q].clone()).collect(),
        }
    }

    /// Quotient by the coarsest bisimulation that respects state kind,
    /// acceptance, transitions and ε-jumps; renumbered as in `reachable`.
    pub fn minimize(&self) -> Ldba {
        let n = self.num_states();
        let mut block: Vec<usize> = Vec::with_capacity(n);
        let mut ids: std::collections::HashMap<(bool, bool), usize> = std::collections::HashMap::new();
        for q in 0..n {
            let next = ids.len();
            block.push(*ids.entry((self.kind[q] == StateKind::N, self.accepting[q])).or_insert(next));
        }
        let mut count = ids.len();
        loop {
            let mut sigs: std::collections::HashMap<(usize, Vec<usize>, Vec<usize>), usize> = std::collections::HashMap::new();
            let mut next_block = Vec::with_capacity(n);
            for q in 0..n {
                let succ: Vec<usize> = self.delta[q].iter().map(|&t| block[t as usize]).collect();
                let mut eps: Vec<usize> = self.epsilon[q].iter().map(|&t| block[t]).collect();
                eps.sort_unstable();
                eps.dedup();
                let len = sigs.len();
                next_block.push(*sigs.entry((block[q], succ, eps)).or_insert(len));
            }
            block = next_block;
            if sigs.len() == count {
                break;
            }
            count = sigs.len();
        }
        let mut rep = vec![usize::MAX; count];
        for q in 0..n {
            if rep[block[q]] == usize::MAX {
                rep[block[q]] = q;
            }
        }
        let quotient = Ldba {
            alphabet: self.alphabet.clone(),
            initial: block[self.initial],
            delta: rep.iter().map(|&q| self.delta[q].iter().map(|&t| block[t as usize] as u32).collect()).collect(),
            accepting: rep.iter().map(|&q| self.accepting[q]).collect(),
            kind: rep.iter().map(|&q| self.kind[q]).collect(),
            epsilon: rep
                .iter()
                .map(|&q| {
                    let mut e: Vec<usize> = self.epsilon[q].iter().map(|&t| block[t]).collect();
                    e.sort_unstable();
                    e.dedup();
                    e
                })
                .collect(),
            names: rep.iter().map(|&q| self.names[q].clone()).collect(),
        };
        quotient.reachable()
    }

    /// Structural equality of the reachable parts, ignoring state names.
    pub fn isomorphic(&self, other: &Ldba) -> bool {
        let a = self.reachable();
        let b = other.reachable();
        a.alphabet == b.alphabet
            && a.delta == b.delta
            && a.accepting == b.accepting
            && a.kind == b.kind
            && a.epsilon == b.epsilon
    }

    /// Graphviz rendering with guards shown as assignment lists.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph ldba {\n  rankdir=LR;\n  init [shape=point];\n");
        for q in 0..self.num_states() {
            let shape = if self.accepting[q] { "doublecircle" } else { "circle" };
            let style = if self.kind[q] == StateKind::N { ", style=dashed" } else { "" };
            let _ = writeln!(s, "  q{q} [shape={shape}{style}, label=\"q{q}\"];");
        }
        let _ = writeln!(s, "  init -> q{};", self.initial);
        for q in 0..self.num_states() {
            for t in self.successors(q) {
                let g = self.guard(q, t);
                let label = if g.is_full() { "true".to_string() } else { g.display(&self.alphabet).to_string() };
                let _ = writeln!(s, "  q{q} -> q{t} [label=\"{}\"];", label.replace('"', "'"));
            }
            for &t in &self.epsilon[q] {
                let _ = writeln!(s, "  q{q} -> q{t} [label=\"ε\", style=dashed];");
            }
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimize_merges_copies() {
        // two identical rejecting loops on !a and two accepting a-states
        let ab = Alphabet::new(["a"]).unwrap();
        let (no, yes) = (Assignment(0), Assignment(1));
        let mut b = LdbaBuilder::new(ab);
        let n = b.add_state(StateKind::N, false, "n");
        let d: Vec<usize> = (0..4).map(|i| b.add_state(StateKind::D, i >= 2, format!("d{i}"))).collect();
        b.set(n, no, n);
        b.set(n, yes, n);
        b.add_epsilon(n, d[0]);
        b.add_epsilon(n, d[1]);
        b.set(d[0], no, d[1]);
        b.set(d[1], no, d[0]);
        b.set(d[0], yes, d[2]);
        b.set(d[1], yes, d[3]);
        b.set(d[2], yes, d[3]);
        b.set(d[3], yes, d[2]);
        b.set(d[2], no, d[0]);
        b.set(d[3], no, d[1]);
        let m = b.finish(n).unwrap().minimize();
        assert_eq!(m.num_states(), 3);
        assert_eq!(m.num_epsilon(), 1);
        assert_eq!(m.num_accepting(), 1);
        assert_eq!(m.initial(), 0);
        assert!(m.minimize().isomorphic(&m));
    }

    #[test]
    fn minimize_keeps_acceptance_apart() {
        let ab = Alphabet::new(["a"]).unwrap();
        let mut b = LdbaBuilder::new(ab);
        let x = b.add_state(StateKind::D, true, "x");
        let y = b.add_state(StateKind::D, false, "y");
        b.set_all(x, &AssignmentSet::full(1), y);
        b.set_all(y, &AssignmentSet::full(1), x);
        assert_eq!(b.finish(x).unwrap().minimize().num_states(), 2);
    }
}
