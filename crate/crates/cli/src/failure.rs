use std::fmt;
use std::path::Path;
use std::process::ExitCode;

/// Why a command stopped, mapped onto the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or parameter values.
    Usage(String),
    /// Missing, unreadable or malformed input files.
    Input(String),
    /// Some catheters could not be segmented; outputs for the rest exist.
    Partial { failed: usize, total: usize },
}

impl Failure {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Input(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
            Failure::Partial { .. } => 4,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Partial { failed, total } => write!(f, "{failed} of {total} catheters failed to segment"),
        }
    }
}

impl From<cathseg::Error> for Failure {
    fn from(e: cathseg::Error) -> Self {
        match e {
            cathseg::Error::InvalidParameter { .. } | cathseg::Error::OverDeflection { .. } => {
                Failure::Usage(e.to_string())
            }
            e => Failure::Input(e.to_string()),
        }
    }
}
