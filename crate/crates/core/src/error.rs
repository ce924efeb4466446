use thiserror::Error;

pub type Result<T, E = ForgeError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForgeError {
    /// Malformed input. `offset` is a byte offset into the source when known.
    #[error("parse error{}: {message}", offset.map(|o| format!(" at byte {o}")).unwrap_or_default())]
    Parse { message: String, offset: Option<usize> },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("conversion error: {0}")]
    Conversion(String),

    #[error("numerical error{}: {message}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Numerical { message: String, step: Option<usize> },

    /// A perturbation found nothing to act on.
    #[error("no-op: {0}")]
    NoOp(String),

    /// CWWM could not reach the requested rate from eligible words alone.
    #[error("whole-word masking not applicable: {0}; fall back to token masking")]
    FallbackToTokenMasking(String),

    #[error("io error: {0}")]
    Io(String),
}

impl ForgeError {
    pub fn parse(message: impl Into<String>) -> Self {
        ForgeError::Parse { message: message.into(), offset: None }
    }

    pub fn parse_at(message: impl Into<String>, offset: usize) -> Self {
        ForgeError::Parse { message: message.into(), offset: Some(offset) }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        ForgeError::Validation(message.into())
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        ForgeError::Numerical { message: message.into(), step: None }
    }

    /// Stable short name used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            ForgeError::Parse { .. } => "parse",
            ForgeError::Validation(_) => "validation",
            ForgeError::Conversion(_) => "conversion",
            ForgeError::Numerical { .. } => "numerical",
            ForgeError::NoOp(_) => "noop",
            ForgeError::FallbackToTokenMasking(_) => "fallback_to_token_masking",
            ForgeError::Io(_) => "io",
        }
    }

    /// Process exit code: 1 validation, 2 parse, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            ForgeError::Parse { .. } => 2,
            ForgeError::Numerical { .. } => 3,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for ForgeError {
    fn from(e: std::io::Error) -> Self {
        ForgeError::Io(e.to_string())
    }
}

/// Convert a 1-based line/column pair (as reported by serde_json) to a byte offset.
pub(crate) fn line_col_to_offset(src: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current = 1;
    let mut start = 0;
    for (i, b) in src.iter().enumerate() {
        if current == line {
            break;
        }
        if *b == b'\n' {
            current += 1;
            start = i + 1;
        }
    }
    (start + column.saturating_sub(1)).min(src.len())
}

impl From<serde_json::Error> for ForgeError {
    fn from(e: serde_json::Error) -> Self {
        ForgeError::parse(e.to_string())
    }
}
