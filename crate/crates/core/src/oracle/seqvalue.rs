use std::collections::HashMap;

use crate::envs::Tabular;
use crate::sequences::{Reach, TruncatedSequence};

/// Optimal `γ^T` value of completing `seq` from each cell, where `T` is the
/// number of environment steps to satisfy every reach step in order without
/// touching an avoid set or leaving the grid. Epsilon steps take no time
/// but are only taken when the current label is outside the next avoid set.
pub fn sequence_values(t: &Tabular, seq: &TruncatedSequence, gamma: f64) -> Vec<f64> {
    let n = seq.len();
    let cells = t.num_states;
    // w[i][s]: value at cell s with step i pending
    let mut w = vec![vec![0.0; cells]; n + 1];
    w[n] = vec![1.0; cells];
    for i in (0..n).rev() {
        let step = &seq.steps[i];
        let gate_open = |s: usize| i + 1 == n || !seq.steps[i + 1].avoid.contains(t.labels[s]);
        let mut cur = vec![0.0; cells];
        if step.reach.is_epsilon() {
            for (s, v) in cur.iter_mut().enumerate() {
                if gate_open(s) {
                    *v = w[i + 1][s];
                }
            }
        }
        let (head, tail) = w.split_at_mut(i + 1);
        let next_step = &tail[0];
        loop {
            let mut changed = false;
            for s in 0..cells {
                if step.reach.is_epsilon() && gate_open(s) {
                    continue;
                }
                let mut best: f64 = 0.0;
                for a in 0..t.num_actions {
                    let Some(s2) = t.next[s][a] else { continue };
                    let l = t.labels[s2];
                    if step.avoid.contains(l) {
                        continue;
                    }
                    let v = match &step.reach {
                        Reach::Set(r) if r.contains(l) => next_step[s2],
                        _ => cur[s2],
                    };
                    best = best.max(gamma * v);
                }
                if best > cur[s] + 1e-15 {
                    cur[s] = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        head[i] = cur;
    }
    w.swap_remove(0)
}

/// Cached ground-truth sequence values on one grid.
#[derive(Clone, Debug)]
pub struct OracleValue {
    pub tabular: Tabular,
    pub gamma: f64,
    cache: HashMap<TruncatedSequence, Vec<f64>>,
}

impl OracleValue {
    pub fn new(tabular: Tabular, gamma: f64) -> Self {
        OracleValue { tabular, gamma, cache: HashMap::new() }
    }

    pub fn value(&mut self, cell: usize, seq: &TruncatedSequence) -> f64 {
        if seq.is_empty() {
            return 1.0;
        }
        if !self.cache.contains_key(seq) {
            let v = sequence_values(&self.tabular, seq, self.gamma);
            self.cache.insert(seq.clone(), v);
        }
        self.cache[seq][cell]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{Assignment, AssignmentSet};
    use crate::sequences::ReachAvoidStep;

    // 1x4 corridor, actions left/right, walls terminate
    fn corridor(labels: Vec<u32>) -> Tabular {
        let n = labels.len();
        Tabular {
            num_states: n,
            num_actions: 2,
            next: (0..n).map(|s| vec![s.checked_sub(1), (s + 1 < n).then_some(s + 1)]).collect(),
            labels: labels.into_iter().map(Assignment).collect(),
            starts: vec![0],
        }
    }

    fn set(props: usize, xs: &[u32]) -> AssignmentSet {
        AssignmentSet::from_assignments(props, xs.iter().map(|&x| Assignment(x)))
    }

    #[test]
    fn reach_and_avoid() {
        // cells: _, b, _, a   (a = bit0, b = bit1)
        let t = corridor(vec![0, 2, 0, 1]);
        let reach_a = TruncatedSequence { steps: vec![ReachAvoidStep::new(set(2, &[1, 3]), set(2, &[]))], k: 3 };
        let v = sequence_values(&t, &reach_a, 0.9);
        assert!((v[0] - 0.9f64.powi(3)).abs() < 1e-12);
        assert!((v[2] - 0.9).abs() < 1e-12);
        let avoid_b = TruncatedSequence { steps: vec![ReachAvoidStep::new(set(2, &[1, 3]), set(2, &[2]))], k: 3 };
        let v = sequence_values(&t, &avoid_b, 0.9);
        assert_eq!(v[0], 0.0);
        assert!((v[2] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn epsilon_is_free_when_gate_open() {
        let t = corridor(vec![0, 2, 0, 1]);
        let seq = TruncatedSequence {
            steps: vec![
                ReachAvoidStep::epsilon(set(2, &[])),
                ReachAvoidStep::new(set(2, &[2]), set(2, &[])),
            ],
            k: 3,
        };
        let v = sequence_values(&t, &seq, 0.5);
        assert!((v[0] - 0.5).abs() < 1e-12);
        assert!((v[3] - 0.25).abs() < 1e-12);
    }
}
