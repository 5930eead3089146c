//! Labelled grid environments and their synchronisation with an automaton.

mod flat;
mod letter;
mod product;

pub use flat::{FlatWorld, FlatWorldConfig, RegionSpec};
pub use letter::{LetterPlacement, LetterWorld, LetterWorldConfig};
pub use product::{ProductAction, ProductEnv, ProductStep, TrajectoryRecord};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::logic::{Alphabet, Assignment, AssignmentSet};

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub label: Assignment,
    pub terminated: bool,
    pub boundary_violation: bool,
}

/// Shape of the flat observation vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObsSpec {
    /// Channel-major image.
    Image { channels: usize, height: usize, width: usize },
    Vector(usize),
}

impl ObsSpec {
    pub fn len(&self) -> usize {
        match *self {
            ObsSpec::Image { channels, height, width } => channels * height * width,
            ObsSpec::Vector(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    LetterWorld(LetterWorldConfig),
    FlatWorld(FlatWorldConfig),
}

impl EnvConfig {
    pub fn build(&self) -> Result<GridEnv> {
        Ok(match self {
            EnvConfig::LetterWorld(c) => GridEnv::Letter(LetterWorld::new(c.clone())?),
            EnvConfig::FlatWorld(c) => GridEnv::Flat(FlatWorld::new(c.clone())?),
        })
    }

    /// Episode cap used during training.
    pub fn default_episode_cap(&self) -> usize {
        match self {
            EnvConfig::LetterWorld(_) => 100,
            EnvConfig::FlatWorld(_) => 200,
        }
    }
}

/// Deterministic grid dynamics as explicit tables, for exact oracles.
#[derive(Clone, Debug)]
pub struct Tabular {
    pub num_states: usize,
    pub num_actions: usize,
    /// `next[s][a]`, `None` when the move terminates the episode.
    pub next: Vec<Vec<Option<usize>>>,
    pub labels: Vec<Assignment>,
    /// Uniform start distribution over these states.
    pub starts: Vec<usize>,
}

#[derive(Clone, Debug)]
pub enum GridEnv {
    Letter(LetterWorld),
    Flat(FlatWorld),
}

macro_rules! dispatch {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            GridEnv::Letter($e) => $body,
            GridEnv::Flat($e) => $body,
        }
    };
}

impl GridEnv {
    pub fn alphabet(&self) -> &Alphabet {
        dispatch!(self, e => e.alphabet())
    }

    pub fn num_actions(&self) -> usize {
        dispatch!(self, e => e.num_actions())
    }

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        dispatch!(self, e => e.reset(seed))
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        dispatch!(self, e => e.step(action))
    }

    pub fn label(&self) -> Assignment {
        dispatch!(self, e => e.label())
    }

    pub fn observation(&self) -> Vec<f64> {
        dispatch!(self, e => e.observation())
    }

    pub fn obs_spec(&self) -> ObsSpec {
        dispatch!(self, e => e.obs_spec())
    }

    pub fn cell(&self) -> usize {
        dispatch!(self, e => e.cell())
    }

    pub fn set_cell(&mut self, cell: usize) {
        dispatch!(self, e => e.set_cell(cell))
    }

    pub fn position(&self) -> (usize, usize) {
        dispatch!(self, e => e.position())
    }

    pub fn size(&self) -> usize {
        dispatch!(self, e => e.size())
    }

    /// Labels that occur somewhere in the current layout.
    pub fn realizable_labels(&self) -> AssignmentSet {
        let t = self.tabular();
        AssignmentSet::from_assignments(self.alphabet().len(), t.labels.iter().copied())
    }

    /// Dynamics of the current layout.
    pub fn tabular(&self) -> Tabular {
        dispatch!(self, e => e.tabular())
    }
}
