use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
    #[error("invalid proposition name `{0}`")]
    InvalidProposition(String),
    #[error("duplicate proposition `{0}`")]
    DuplicateProposition(String),
    #[error("alphabet has {0} propositions, at most 16 are supported")]
    AlphabetTooLarge(usize),
    #[error("state limit of {0} exceeded")]
    StateLimit(usize),
    #[error("path limit of {0} exceeded")]
    PathLimit(usize),
    #[error("malformed HOA: {0}")]
    MalformedHoa(String),
    #[error("unsupported acceptance condition: {0}")]
    UnsupportedAcceptance(String),
    #[error("action {action} out of range (0..{n})")]
    ActionOutOfRange { action: usize, n: usize },
    #[error("no epsilon transition from automaton state {0}")]
    IllegalEpsilon(usize),
    #[error("task infeasible: automaton state {0} cannot reach an accepting cycle")]
    Infeasible(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("policy enumeration limit of {0} exceeded")]
    EnumerationLimit(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("mismatch: {0}")]
    Mismatch(String),
}
