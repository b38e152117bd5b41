use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum VimError {
    /// Invalid configuration: unknown columns, bad flags, incompatible options.
    #[error("{0}")]
    Config(String),

    /// Malformed or inconsistent input data.
    #[error("{0}")]
    Data(String),

    /// Too few observations for the requested fold layout.
    #[error("n = {n} is too small for {folds} folds{}; need n >= {min_n}", if *.split { " with sample splitting" } else { "" })]
    Sizing {
        n: usize,
        folds: usize,
        split: bool,
        min_n: usize,
    },

    /// Removing the feature group leaves no columns.
    #[error("reduced dataset empty: feature group covers all {p} columns")]
    EmptyReduced { p: usize },

    /// The measure is undefined on the supplied data.
    #[error("degenerate input for {measure}: {reason}")]
    Degenerate {
        measure: &'static str,
        reason: String,
    },

    /// A single cross-fitting fold is degenerate for the measure.
    #[error("fold {fold} is degenerate: {reason}")]
    FoldDegenerate { fold: usize, reason: String },

    /// A learner could not be fit.
    #[error("learner {learner} failed: {reason}")]
    Learner { learner: String, reason: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse error classes, mapped onto CLI exit codes and message prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Degenerate,
}

impl ErrorClass {
    pub fn prefix(self) -> &'static str {
        match self {
            ErrorClass::Config => "E_CONFIG",
            ErrorClass::Data => "E_DATA",
            ErrorClass::Degenerate => "E_DEGENERATE",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Degenerate => 4,
        }
    }
}

impl VimError {
    pub fn class(&self) -> ErrorClass {
        match self {
            VimError::Config(_) | VimError::EmptyReduced { .. } => ErrorClass::Config,
            VimError::Data(_) | VimError::Sizing { .. } | VimError::Io(_) => ErrorClass::Data,
            VimError::Degenerate { .. }
            | VimError::FoldDegenerate { .. }
            | VimError::Learner { .. } => ErrorClass::Degenerate,
        }
    }

    pub(crate) fn degenerate(measure: &'static str, reason: impl Into<String>) -> Self {
        VimError::Degenerate {
            measure,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, VimError>;
