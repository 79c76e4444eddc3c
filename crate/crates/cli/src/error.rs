use thiserror::Error;

/// Failure of a run, mapped to the process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or out-of-range input: exit 2.
    #[error("schema violation: {0}")]
    Schema(String),
    /// A model evaluation, propagation or fit failed: exit 3.
    #[error("numerical failure in {context}: {source}")]
    Numerical {
        context: &'static str,
        #[source]
        source: eitlab_core::Error,
    },
}

impl CliError {
    pub fn schema(msg: impl Into<String>) -> Self {
        CliError::Schema(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

/// Attaches a context to core errors. Invalid parameters and a zero input
/// flux are schema violations; everything else is numerical.
pub trait Context<T> {
    fn context(self, context: &'static str) -> Result<T, CliError>;
}

impl<T> Context<T> for eitlab_core::Result<T> {
    fn context(self, context: &'static str) -> Result<T, CliError> {
        self.map_err(|e| match e {
            eitlab_core::Error::InvalidParameter { .. } | eitlab_core::Error::ZeroInput => CliError::Schema(format!("{context}: {e}")),
            other => CliError::Numerical { context, source: other },
        })
    }
}
