//! A MongoDB-style filter language over JSON mappings.
//!
//! Supported operators: `$eq $ne $gt $gte $lt $lte $in $nin $exists` on
//! fields and `$and $or $not` for composition. Paths are dotted key paths;
//! arrays are never indexed. Equality treats `1` and `1.0` as equal, while
//! ordering comparisons between different kinds (number vs string, ...)
//! are simply false.

mod eval;
mod filter;
mod tokens;

pub use eval::{lookup_path, matches, values_equal, Lookup};
pub use filter::{parse_filter, parse_filter_value, Comparison, Filter, Op};
pub use tokens::parse_cli_tokens;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("invalid filter at {path:?}: {message}")]
    Parse { path: String, message: String },
    #[error("usage: {0}")]
    Usage(String),
}

impl QueryError {
    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        QueryError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
