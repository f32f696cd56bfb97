use std::fmt;

/// Exit status for input, usage and configuration problems.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for numerical failures (non-finite loss, no convergence).
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_USAGE,
            error: error.into(),
        }
    }
}

impl From<bsal::Error> for Failure {
    fn from(e: bsal::Error) -> Self {
        let code = if is_numerical(&e) { EXIT_NUMERICAL } else { EXIT_USAGE };
        Failure {
            code,
            error: e.into(),
        }
    }
}

fn is_numerical(e: &bsal::Error) -> bool {
    match e {
        bsal::Error::Numerical(_) | bsal::Error::NoConvergence { .. } => true,
        bsal::Error::AtPair { source, .. } => is_numerical(source),
        _ => false,
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}
