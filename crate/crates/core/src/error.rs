use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core operations.
#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("region {region} lies outside a {width}x{height} image")]
    OutOfBounds {
        region: String,
        width: u32,
        height: u32,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// The 9×9 matrix is missing one or more (train, test) cells.
    #[error("incomplete matrix, missing cells: {}", format_pairs(.missing))]
    IncompleteMatrix { missing: Vec<(String, String)> },

    /// The gradient check landed within `tolerance` of a non-differentiable point.
    #[error("configuration sits on a kink ({what}); re-sample the batch")]
    OnKink { what: &'static str },

    #[error("training diverged at step {step}")]
    Diverged { step: usize },

    #[error("no parseable records")]
    EmptyManifest,
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    for (i, (train, test)) in pairs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('(');
        out.push_str(train);
        out.push_str(", ");
        out.push_str(test);
        out.push(')');
    }
    out
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
