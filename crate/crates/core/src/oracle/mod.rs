//! Exact tabular ground truth on explicit product MDPs.

mod bounds;
mod chain;
mod mdp;
mod seqvalue;

pub use bounds::{
    failure_visits, monte_carlo_failure_visits, theorem1_check, McEstimate, PolicyReport, TheoremReport,
};
pub use chain::{eventual_discounted_value, initial_value, satisfaction_probability, satisfaction_by_state};
pub use mdp::{
    build_product, fig6, optimal_value_iteration, policy_value, Choice, ExplicitMdp, PolicyTable, ProductMdp,
    ProductState, ValueIteration, DEFAULT_PRODUCT_LIMIT,
};
pub use seqvalue::{sequence_values, OracleValue};
