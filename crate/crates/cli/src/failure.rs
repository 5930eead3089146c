use std::fmt;
use std::process::ExitCode;

/// Command failure with its exit code class.
#[derive(Debug)]
pub enum Failure {
    /// Bad input: syntax, unknown propositions, invalid configuration.
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(2),
            Failure::Runtime(_) => ExitCode::from(1),
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            Failure::Usage(m) => Failure::Usage(format!("{what}: {m}")),
            Failure::Runtime(m) => Failure::Runtime(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ltlseq::Error> for Failure {
    fn from(e: ltlseq::Error) -> Self {
        use ltlseq::Error::*;
        match e {
            Syntax { .. }
            | UnknownProposition(_)
            | InvalidProposition(_)
            | DuplicateProposition(_)
            | AlphabetTooLarge(_)
            | Config(_)
            | Mismatch(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}
