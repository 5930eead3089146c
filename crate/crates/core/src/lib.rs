//! Compile LTL tasks into limit-deterministic Büchi automata, turn accepting
//! cycles into reach-avoid sequences, train sequence-conditioned policies on
//! small grid worlds, and check everything against exact tabular oracles.

pub mod automata;
pub mod envs;
pub mod error;
pub mod executor;
pub mod graph;
pub mod learn;
pub mod logic;
pub mod oracle;
pub mod par;
pub mod sequences;
pub mod testing;

pub use error::{Error, Result};
