//! LTL formulas, parsing, negation normal form, and exact evaluation on lasso words.

mod alphabet;
mod formula;
mod lasso;
mod parse;

pub use alphabet::{Alphabet, Assignment, AssignmentSet, MAX_PROPS};
pub use formula::{to_nnf, Formula};
pub use lasso::{enumerate_lassos, satisfies, LassoWord};
pub use parse::{parse, parse_inferring};
