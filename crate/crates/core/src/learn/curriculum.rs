use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::logic::{Assignment, AssignmentSet};
use crate::sequences::{ReachAvoidSequence, ReachAvoidStep, TruncatedSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvoidMode {
    Never,
    Always,
    /// Each step carries an avoid set with probability one half.
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumStage {
    pub max_len: usize,
    pub max_reach: usize,
    pub max_avoid: usize,
    pub avoid: AvoidMode,
    /// Window success rate needed to move on.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub stages: Vec<CurriculumStage>,
    /// Episodes in the sliding success window.
    pub window: usize,
}

impl Curriculum {
    pub fn letter_world() -> Self {
        let st = |max_len, max_reach, max_avoid| CurriculumStage {
            max_len,
            max_reach,
            max_avoid,
            avoid: AvoidMode::Always,
            threshold: 0.95,
        };
        Curriculum { stages: vec![st(1, 1, 1), st(1, 2, 2), st(2, 2, 2), st(3, 2, 3)], window: 1000 }
    }

    pub fn flat_world() -> Self {
        let st = |max_reach, max_avoid| CurriculumStage { max_len: 2, max_reach, max_avoid, avoid: AvoidMode::Mixed, threshold: 0.8 };
        Curriculum { stages: vec![st(1, 1), st(2, 2)], window: 1000 }
    }

    pub fn check(&self) -> crate::Result<()> {
        if self.stages.is_empty() || self.window == 0 {
            return Err(crate::Error::Config("curriculum needs stages and a positive window".into()));
        }
        for s in &self.stages {
            if !(s.threshold > 0.0 && s.threshold <= 1.0) || s.max_len == 0 || s.max_reach == 0 {
                return Err(crate::Error::Config("invalid curriculum stage".into()));
            }
        }
        Ok(())
    }
}

/// Success tracking for the current stage.
#[derive(Clone, Debug, Default)]
pub struct CurriculumState {
    pub stage: usize,
    window: VecDeque<bool>,
}

impl CurriculumState {
    pub fn record(&mut self, success: bool, c: &Curriculum) {
        self.window.push_back(success);
        if self.window.len() > c.window {
            self.window.pop_front();
        }
    }

    pub fn rate(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.window.iter().filter(|&&s| s).count() as f64 / self.window.len() as f64
        }
    }

    /// Moves to the next stage once the window is full and above threshold.
    pub fn maybe_advance(&mut self, c: &Curriculum) -> bool {
        if self.stage + 1 < c.stages.len() && self.window.len() >= c.window && self.rate() >= c.stages[self.stage].threshold {
            self.stage += 1;
            self.window.clear();
            return true;
        }
        false
    }
}

/// Random finite reach-avoid task, ending in a trivial accepting loop.
/// Propositions are drawn from those occurring in `realizable`; a label
/// belongs to the reach set when it holds a reach proposition and no avoid
/// proposition, and to the avoid set when it holds an avoid proposition.
pub fn sample_sequence(stage: &CurriculumStage, num_props: usize, realizable: &AssignmentSet, rng: &mut impl Rng) -> ReachAvoidSequence {
    let props: Vec<usize> = (0..num_props).filter(|&p| realizable.iter().any(|a| a.contains(p))).collect();
    assert!(!props.is_empty(), "no proposition occurs in the environment");
    let len = rng.random_range(1..=stage.max_len);
    let mut steps = Vec::with_capacity(len + 1);
    let mut prev: Vec<usize> = Vec::new();
    while steps.len() < len {
        let pool: Vec<usize> = props.iter().copied().filter(|p| !prev.contains(p)).collect();
        let pool = if pool.is_empty() { props.clone() } else { pool };
        let n_reach = rng.random_range(1..=stage.max_reach.min(pool.len()));
        let reach: Vec<usize> = pool.choose_multiple(rng, n_reach).copied().collect();
        let with_avoid = match stage.avoid {
            AvoidMode::Never => false,
            AvoidMode::Always => true,
            AvoidMode::Mixed => rng.random_bool(0.5),
        };
        let rest: Vec<usize> = props.iter().copied().filter(|p| !reach.contains(p)).collect();
        let avoid: Vec<usize> = if with_avoid && stage.max_avoid > 0 && !rest.is_empty() {
            let n = rng.random_range(1..=stage.max_avoid.min(rest.len()));
            rest.choose_multiple(rng, n).copied().collect()
        } else {
            Vec::new()
        };
        let hits = |a: Assignment, ps: &[usize]| ps.iter().any(|&p| a.contains(p));
        let plus = AssignmentSet::from_assignments(num_props, realizable.iter().filter(|&a| hits(a, &reach) && !hits(a, &avoid)));
        let minus = AssignmentSet::from_assignments(num_props, realizable.iter().filter(|&a| hits(a, &avoid)));
        if plus.is_empty() {
            continue;
        }
        steps.push(ReachAvoidStep::new(plus, minus));
        prev = reach;
    }
    steps.push(ReachAvoidStep::new(AssignmentSet::full(num_props), AssignmentSet::empty(num_props)));
    ReachAvoidSequence { loop_start: len, steps }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskOutcome {
    Success,
    Violation,
    Timeout,
}

/// Progress through a finite sequence during a training episode.
#[derive(Clone, Debug)]
pub struct EpisodeProgress {
    pub seq: TruncatedSequence,
    pub index: usize,
    pub outcome: Option<TaskOutcome>,
}

impl EpisodeProgress {
    pub fn new(seq: TruncatedSequence) -> Self {
        EpisodeProgress { seq, index: 0, outcome: None }
    }

    pub fn done(&self) -> bool {
        self.outcome.is_some()
    }

    /// Remaining steps, as seen by the policy.
    pub fn remaining(&self) -> TruncatedSequence {
        TruncatedSequence { steps: self.seq.steps[self.index..].to_vec(), k: self.seq.k }
    }

    /// Reward for arriving at a state labelled `label`. Avoid wins over
    /// reach.
    pub fn progress_and_reward(&mut self, label: Assignment) -> (f64, bool) {
        assert!(!self.done(), "episode already finished");
        let step = &self.seq.steps[self.index];
        if step.avoid.contains(label) {
            self.outcome = Some(TaskOutcome::Violation);
            return (-1.0, true);
        }
        if step.reach.contains(label) {
            self.index += 1;
            if self.index == self.seq.len() {
                self.outcome = Some(TaskOutcome::Success);
                return (1.0, true);
            }
        }
        (0.0, false)
    }

    pub fn timeout(&mut self) {
        if self.outcome.is_none() {
            self.outcome = Some(TaskOutcome::Timeout);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::truncate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn letters(n: usize) -> AssignmentSet {
        let mut s = AssignmentSet::from_assignments(n, (0..n).map(|i| Assignment(1 << i)));
        s.insert(Assignment::EMPTY);
        s
    }

    #[test]
    fn stage_one_shape() {
        let c = Curriculum::letter_world();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let s = sample_sequence(&c.stages[0], 4, &letters(4), &mut rng);
            let t = truncate(&s, 1);
            assert_eq!(t.len(), 1);
            let st = &t.steps[0];
            assert_eq!(st.reach.as_set().unwrap().len(), 1);
            assert_eq!(st.avoid.len(), 1);
            assert!(st.reach.as_set().unwrap().is_disjoint(&st.avoid));
        }
    }

    #[test]
    fn final_stage_bounds_and_determinism() {
        let c = Curriculum::letter_world();
        let last = c.stages.last().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut saw_three = false;
        for _ in 0..200 {
            let t = truncate(&sample_sequence(last, 6, &letters(6), &mut rng), 1);
            assert!(t.len() <= 3);
            saw_three |= t.len() == 3;
            for st in &t.steps {
                assert!(st.avoid.len() <= 3 && st.reach.as_set().unwrap().len() <= 2);
            }
        }
        assert!(saw_three);
        let a = sample_sequence(last, 6, &letters(6), &mut ChaCha8Rng::seed_from_u64(3));
        let b = sample_sequence(last, 6, &letters(6), &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn rewards() {
        let a = AssignmentSet::from_assignments(2, [Assignment(1)]);
        let b = AssignmentSet::from_assignments(2, [Assignment(2)]);
        let seq = TruncatedSequence { steps: vec![ReachAvoidStep::new(a.clone(), b.clone())], k: 1 };
        let mut p = EpisodeProgress::new(seq.clone());
        assert_eq!(p.progress_and_reward(Assignment::EMPTY), (0.0, false));
        assert_eq!(p.progress_and_reward(Assignment(1)), (1.0, true));
        assert_eq!(p.outcome, Some(TaskOutcome::Success));
        let mut p = EpisodeProgress::new(seq);
        assert_eq!(p.progress_and_reward(Assignment(2)), (-1.0, true));
        assert_eq!(p.outcome, Some(TaskOutcome::Violation));
    }

    #[test]
    fn advancement_needs_full_window() {
        let c = Curriculum { window: 10, ..Curriculum::letter_world() };
        let mut st = CurriculumState::default();
        for _ in 0..9 {
            st.record(true, &c);
        }
        assert!(!st.maybe_advance(&c));
        st.record(true, &c);
        assert!(st.maybe_advance(&c));
        assert_eq!(st.stage, 1);
        for i in 0..10 {
            st.record(i != 0, &c);
        }
        assert!(!st.maybe_advance(&c));
    }
}
