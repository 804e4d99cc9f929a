use std::fmt;

use thiserror::Error;

/// Location-tagged diagnostic produced by the text parsers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.line, self.column, self.message
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("epoch {t} outside interpolation span [{start}, {end}]")]
    OutOfSpan {
        t: String,
        start: String,
        end: String,
    },

    #[error("super-refraction between radii {r_lo:.1} m and {r_hi:.1} m")]
    SuperRefraction { r_lo: f64, r_hi: f64 },

    #[error("no ray bracket: {0}")]
    NoBracket(String),

    #[error("stage mismatch: expected {expected}, found {found}")]
    Stage {
        expected: &'static str,
        found: &'static str,
    },

    #[error("no eligible reference arc with mean elevation >= {min_elevation_deg:.1} deg; relax the reference elevation floor")]
    NoReference { min_elevation_deg: f64 },

    #[error("kernel matrix not positive definite after jitter escalation")]
    NotPositiveDefinite,

    #[error("missing variable `{0}`")]
    MissingVariable(String),

    #[error("too many failed samples: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("unknown outcome tag `{0}`")]
    UnknownOutcome(String),

    #[error("no overlap: {0}")]
    NoOverlap(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
