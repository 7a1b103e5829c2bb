use std::fmt;
use std::process::ExitCode;

use covconc::Error;

/// Reasons the process exits nonzero.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable or unparseable input.
    Usage(String),
    /// A PSD operator was required and the input is not PSD.
    NotPsd(String),
    /// A bound parameter equation has no solution.
    Infeasible(String),
    /// The command ran but at least one check failed.
    ChecksFailed(usize),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::ChecksFailed(_) => 1,
            Failure::Usage(_) => 2,
            Failure::NotPsd(_) => 3,
            Failure::Infeasible(_) => 4,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::NotPsd(m) => write!(f, "not positive semidefinite: {m}"),
            Failure::Infeasible(m) => write!(f, "infeasible: {m}"),
            Failure::ChecksFailed(k) => write!(f, "{k} check(s) failed"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible { condition, detail } => {
                Failure::Infeasible(format!("{condition}: {detail}"))
            }
            other => Failure::Usage(other.to_string()),
        }
    }
}
