use thiserror::Error;

/// Problems loading or validating a scenario.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario file: {0}")]
    Parse(String),
    #[error("unsupported schema_version {found} (this build reads {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Name of the offending field, when the error is a validation failure.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// Failures of the numerical machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("detection variance is not positive ({variance}); operating point unusable")]
    DegenerateVariance { variance: f64 },
    #[error("quadrature did not converge at {nodes} nodes (last estimate {estimate:e}, gap {gap:e})")]
    NoConvergence { nodes: usize, estimate: f64, gap: f64 },
    #[error("bisection exceeded {cap} iterations")]
    IterationCap { cap: usize },
    #[error("argument out of domain: {0}")]
    Domain(String),
}

/// Top-level error for operations that touch both configuration and numerics.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}
