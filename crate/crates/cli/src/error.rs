use std::fmt;
use std::process::ExitCode;

/// A failure mapped onto the stable exit-code contract.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag combinations (exit 2).
    Usage(String),
    /// Reading or writing a file failed (exit 3).
    Io(String),
    /// An input file violates a format or domain invariant (exit 4).
    Input(String),
    /// The solver could not produce a solution (exit 5).
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Input(_) => 4,
            CliError::Solver(_) => 5,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<relfuse::tracker::TrackerError> for CliError {
    fn from(e: relfuse::tracker::TrackerError) -> Self {
        use relfuse::tracker::TrackerError as E;
        match e {
            E::NotPositiveDefinite { .. } | E::ResidualTooLarge { .. } | E::ProblemTooLarge(_) => {
                CliError::Solver(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<relfuse::formats::FormatError> for CliError {
    fn from(e: relfuse::formats::FormatError) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
