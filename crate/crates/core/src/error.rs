use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core computations.
///
/// Every variant names the offending entity so that loader and CLI messages
/// can point at the exact row or identifier.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {rule}")]
    Invalid { field: String, rule: String },

    #[error("unknown {kind} `{id}`")]
    Unknown { kind: &'static str, id: String },

    #[error("duplicate {kind} `{id}`")]
    Duplicate { kind: &'static str, id: String },

    #[error("{from} references unknown {kind} `{id}`")]
    Dangling {
        from: String,
        kind: &'static str,
        id: String,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("endpoint {endpoint} is missing {what}")]
    MissingFactor { endpoint: String, what: &'static str },

    #[error("client error: {0}")]
    Client(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            rule: rule.into(),
        }
    }

    pub(crate) fn unknown(kind: &'static str, id: impl Into<String>) -> Self {
        Error::Unknown {
            kind,
            id: id.into(),
        }
    }
}
