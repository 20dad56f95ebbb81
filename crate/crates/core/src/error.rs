use chrono::NaiveDate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    /// A NaN or infinity appeared in the recurrence at `step` (0-based).
    #[error("non-finite value at time step {step}")]
    NumericFault { step: usize },

    #[error("numeric fault in epoch {epoch}, batch {batch}: {source}")]
    TrainingFault {
        epoch: usize,
        batch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numeric fault for basin {basin} on {date}: {source}")]
    DayFault {
        basin: String,
        date: NaiveDate,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Load {
        path: String,
        line: Option<usize>,
        message: String,
    },

    #[error("zero variance in column `{0}`")]
    ZeroVariance(String),

    #[error("degenerate {what}: {reason}")]
    Degenerate { what: String, reason: String },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn load(
        path: impl AsRef<std::path::Path>,
        line: Option<usize>,
        message: impl Into<String>,
    ) -> Self {
        Error::Load {
            path: path.as_ref().display().to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
