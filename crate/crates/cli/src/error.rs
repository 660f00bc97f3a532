use std::fmt;

/// Which exit code an error maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Unreadable or schema-invalid input data: exit 1.
    Input,
    /// Bad configuration or flag values: exit 2.
    Config,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub error: anyhow::Error,
}

pub type CliResult<T = ()> = Result<T, CliError>;

impl CliError {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self { kind: Kind::Input, error: error.into() }
    }

    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self { kind: Kind::Config, error: error.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            Kind::Input => 1,
            Kind::Config => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub trait Classify<T> {
    fn input(self) -> CliResult<T>;
    fn config(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> CliResult<T> {
        self.map_err(CliError::input)
    }

    fn config(self) -> CliResult<T> {
        self.map_err(CliError::config)
    }
}
