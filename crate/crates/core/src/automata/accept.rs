use std::collections::VecDeque;

use super::Ldba;
use crate::graph;
use crate::logic::LassoWord;

/// Accepting run on a lasso word as `(automaton state, word position)` pairs:
/// a finite stem followed by a cycle that is repeated forever.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunWitness {
    pub stem: Vec<(usize, usize)>,
    pub cycle: Vec<(usize, usize)>,
}

/// Decides whether some run of `b` on `w` visits an accepting state
/// infinitely often. ε-jumps consume no position.
pub fn accepts(b: &Ldba, w: &LassoWord) -> (bool, Option<RunWitness>) {
    let len = w.len();
    let n = b.num_states() * len;
    let node = |q: usize, i: usize| q * len + i;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|x| {
            let (q, i) = (x / len, x % len);
            let mut v = vec![node(b.delta(q, w.at(i)), w.succ(i))];
            v.extend(b.epsilon(q).iter().map(|&t| node(t, i)));
            v
        })
        .collect();
    let start = node(b.initial(), 0);
    let reach = graph::reachable(&adj, [start]);
    let sccs = graph::scc(&adj);
    let target = (0..n).find(|&x| reach[x] && b.is_accepting(x / len) && sccs.is_nontrivial(sccs.comp[x], &adj));
    let Some(target) = target else {
        return (false, None);
    };
    let stem = bfs_path(&adj, start, target, |_| true);
    let comp = sccs.comp[target];
    let mut cycle = Vec::new();
    // shortest way back to target inside its component
    let back: Vec<usize> = adj[target].iter().copied().filter(|&v| sccs.comp[v] == comp).collect();
    let mut best: Option<Vec<usize>> = None;
    for v in back {
        let p = bfs_path(&adj, v, target, |x| sccs.comp[x] == comp);
        if best.as_ref().is_none_or(|b| p.len() < b.len()) {
            best = Some(p);
        }
    }
    cycle.push(target);
    if let Some(p) = best {
        cycle.extend(p.into_iter().filter(|&x| x != target));
    }
    let split = |x: usize| (x / len, x % len);
    let mut stem: Vec<(usize, usize)> = stem.into_iter().map(split).collect();
    stem.pop();
    (
        true,
        Some(RunWitness {
            stem,
            cycle: cycle.into_iter().map(split).collect(),
        }),
    )
}

fn bfs_path(adj: &[Vec<usize>], from: usize, to: usize, allowed: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut prev = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::from([from]);
    prev[from] = from;
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for &v in &adj[u] {
            if prev[v] == usize::MAX && allowed(v) {
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::compile;
    use crate::logic::{parse, Alphabet};

    #[test]
    fn fig2_words() {
        let ab = Alphabet::new(["a", "b"]).unwrap();
        let b = compile(&parse("(F G a) | F b", &ab).unwrap(), &ab).unwrap();
        let a = |s: &[&str]| ab.assignment(s).unwrap();
        let (ok, wit) = accepts(&b, &LassoWord::new(vec![], vec![a(&["b"])]));
        assert!(ok);
        let wit = wit.unwrap();
        assert!(wit.cycle.iter().any(|&(q, _)| b.is_accepting(q)));
        let (ok, wit) = accepts(&b, &LassoWord::new(vec![], vec![a(&["a"])]));
        assert!(ok);
        assert!(wit.unwrap().cycle.iter().all(|&(q, _)| q == b.epsilon(b.initial())[0]));
        assert!(!accepts(&b, &LassoWord::new(vec![], vec![a(&[])])).0);
    }
}
