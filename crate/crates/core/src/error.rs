use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Param { name: &'static str, reason: String },

    #[error("arm index {arm} out of range for {arms} arms")]
    ArmIndex { arm: usize, arms: usize },

    #[error("environment exhausted: horizon {horizon} reached")]
    Exhausted { horizon: u64 },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("trial {trial} (seed {seed:#018x}) failed: {source}")]
    Trial {
        trial: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Param {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Whether the error stems from user-supplied configuration rather than a
    /// failure during execution.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Param { .. } | Error::Config { .. })
    }
}
