//! Büchi automata: the limit-deterministic automaton used everywhere else, a
//! formula compiler, the tableau + breakpoint route, lasso acceptance and HOA
//! interchange.

mod accept;
mod compile;
mod hoa;
mod ldba;
mod nba;

pub use accept::{accepts, RunWitness};
pub use compile::{compile, compile_via_nba, compile_with, CompileOptions};
pub use hoa::{export_hoa, import_hoa};
pub use ldba::{Ldba, LdbaBuilder, StateKind};
pub use nba::{ltl_to_nba, nba_accepts, nba_to_ldba, Nba};

/// Default cap on constructed automaton states.
pub const DEFAULT_STATE_LIMIT: usize = 20_000;
