use std::fmt;

use thiserror::Error;

/// Errors produced by the modelling library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input is not valid UTF-8: {0}")]
    Decode(#[from] std::str::Utf8Error),

    #[error("context {context} was never observed{}", fmt_position(.position))]
    MissingContext {
        context: ContextDisplay,
        /// Step of a sampling walk at which the context was needed, if any.
        position: Option<usize>,
    },

    #[error("{0}")]
    Domain(String),

    #[error("insufficient data: need at least {needed} items, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("malformed model file at line {line}: {message}")]
    Format { line: usize, message: String },
}

fn fmt_position(position: &Option<usize>) -> String {
    match position {
        Some(p) => format!(" (at step {p})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn missing(context: &[u32]) -> Self {
        Error::MissingContext {
            context: ContextDisplay(context.to_vec()),
            position: None,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: msg.into(),
        }
    }
}

/// Id tuple carried by [`Error::MissingContext`], printed as `(1 2 3)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextDisplay(pub Vec<u32>);

impl fmt::Display for ContextDisplay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, id) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{id}")?;
        }
        f.write_str(")")
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
