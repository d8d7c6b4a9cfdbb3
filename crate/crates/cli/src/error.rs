//! Exit-code carrying errors.

use std::fmt;

/// Process exit codes.
pub mod code {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const FORMAT: i32 = 2;
    pub const ALIGNMENT: i32 = 3;
    pub const CONFIG: i32 = 4;
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: i32, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }

    pub fn format(error: impl Into<anyhow::Error>) -> Self {
        Self::new(code::FORMAT, error)
    }

    pub fn alignment(error: impl Into<anyhow::Error>) -> Self {
        Self::new(code::ALIGNMENT, error)
    }

    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self::new(code::CONFIG, error)
    }

    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        Self::new(code::IO, error)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

/// Engine errors map onto exit codes by kind.
impl From<ordinalflow::Error> for Failure {
    fn from(e: ordinalflow::Error) -> Self {
        use ordinalflow::Error as E;
        let code = match &e {
            E::Parse { .. } | E::Contiguity { .. } | E::Arity { .. } => code::FORMAT,
            E::Alignment(_) => code::ALIGNMENT,
            E::InvalidArgument(_) | E::NotReady(_) => code::CONFIG,
            E::Io(_) => code::IO,
        };
        Self::new(code, e)
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;
