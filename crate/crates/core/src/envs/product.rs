use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{GridEnv, StepResult};
use crate::automata::Ldba;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProductAction {
    Env(usize),
    /// ε-jump to the given automaton state.
    Epsilon(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductStep {
    pub result: StepResult,
    pub q: usize,
    pub accepting: bool,
}

/// Environment and automaton advanced in lockstep. The automaton reads the
/// label of every state the agent arrives in, including the start state.
#[derive(Clone, Debug)]
pub struct ProductEnv {
    pub env: GridEnv,
    ldba: Arc<Ldba>,
    q: usize,
}

impl ProductEnv {
    pub fn new(env: GridEnv, ldba: Arc<Ldba>) -> Self {
        let q = ldba.initial();
        ProductEnv { env, ldba, q }
    }

    pub fn ldba(&self) -> &Ldba {
        &self.ldba
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let obs = self.env.reset(seed);
        self.q = self.ldba.delta(self.ldba.initial(), self.env.label());
        obs
    }

    /// Places the agent and re-reads its label from the initial automaton state.
    pub fn reset_to_cell(&mut self, cell: usize) -> Vec<f64> {
        self.env.set_cell(cell);
        self.q = self.ldba.delta(self.ldba.initial(), self.env.label());
        self.env.observation()
    }

    pub fn epsilon_targets(&self) -> &[usize] {
        self.ldba.epsilon(self.q)
    }

    pub fn step(&mut self, action: ProductAction) -> Result<ProductStep> {
        match action {
            ProductAction::Env(a) => {
                let result = self.env.step(a)?;
                self.q = self.ldba.delta(self.q, result.label);
                Ok(ProductStep { result, q: self.q, accepting: self.ldba.is_accepting(self.q) })
            }
            ProductAction::Epsilon(t) => {
                if !self.ldba.epsilon(self.q).contains(&t) {
                    return Err(Error::IllegalEpsilon(self.q));
                }
                self.q = t;
                let result = StepResult {
                    observation: self.env.observation(),
                    label: self.env.label(),
                    terminated: false,
                    boundary_violation: false,
                };
                Ok(ProductStep { result, q: self.q, accepting: self.ldba.is_accepting(self.q) })
            }
        }
    }
}

/// One line of a trajectory dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub row: usize,
    pub col: usize,
    /// `None` for the initial record.
    pub action: Option<ProductAction>,
    pub label: Vec<String>,
    pub q: usize,
    pub reward: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::compile;
    use crate::envs::{LetterPlacement, LetterWorld, LetterWorldConfig};
    use crate::logic::parse;

    fn setup() -> ProductEnv {
        let cfg = LetterWorldConfig {
            size: 5,
            num_letters: 2,
            copies_per_letter: 1,
            layout: Some(vec![
                LetterPlacement { letter: "a".into(), row: 0, col: 0 },
                LetterPlacement { letter: "b".into(), row: 0, col: 2 },
            ]),
            ..Default::default()
        };
        let env = GridEnv::Letter(LetterWorld::new(cfg).unwrap());
        let ab = env.alphabet().clone();
        let b = compile(&parse("(F G a) | F b", &ab).unwrap(), &ab).unwrap();
        ProductEnv::new(env, Arc::new(b))
    }

    #[test]
    fn fig2_product_steps() {
        let mut p = setup();
        p.reset_to_cell(1);
        let q0 = p.ldba().initial();
        assert_eq!(p.q(), q0);
        let q2 = p.epsilon_targets()[0];
        let mut eps = p.clone();
        let s = eps.step(ProductAction::Epsilon(q2)).unwrap();
        assert_eq!((s.q, eps.env.cell()), (q2, 1));
        assert!(eps.step(ProductAction::Epsilon(q2)).is_err());
        let s = p.step(ProductAction::Env(1)).unwrap();
        assert!(s.accepting);
        p.reset_to_cell(12);
        let s = p.step(ProductAction::Env(0)).unwrap();
        assert_eq!(s.q, q0);
    }
}
