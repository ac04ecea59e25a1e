use std::fmt;

/// A failure reported to the user as a single `error code=... message=...`
/// line. `code` is a stable snake_case identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    /// Process exit status: 2 for bad invocations, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.code {
            "invalid_args" => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = self.message.replace('\n', " ");
        write!(f, "error code={} message={:?}", self.code, one_line.trim())
    }
}

impl std::error::Error for CliError {}
