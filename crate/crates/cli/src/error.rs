use ttlc_core::Error;

/// Failure of a CLI command, carrying a machine-readable category.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    /// Missing, stale or locked pipeline-state artifacts.
    #[error("state error: {0}")]
    State(String),
}

impl CliError {
    pub fn state(msg: impl Into<String>) -> Self {
        CliError::State(msg.into())
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::State(_) => "state",
        }
    }

    /// Process exit code; 2 is left to argument parsing.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 3,
            "input" => 4,
            "data" => 5,
            "parse" => 6,
            "training" => 7,
            "pipeline" => 8,
            "io" => 9,
            "json" => 10,
            "csv" => 11,
            "state" => 12,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
