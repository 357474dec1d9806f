use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate discretization: no lattice site of {domain} at N={n}")]
    DegenerateDiscretization { domain: String, n: u32 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported domain for this method: {0}")]
    UnsupportedDomain(String),

    #[error("matrix not positive definite at pivot {0}")]
    NotPositiveDefinite(usize),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateDiscretization { .. } => "degenerate_discretization",
            Error::InvalidDomain(_) => "invalid_domain",
            Error::Domain(_) => "domain",
            Error::Precondition(_) => "precondition",
            Error::UnsupportedDomain(_) => "unsupported_domain",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::Resource(_) => "resource",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Statistics(_) => "statistics",
            Error::Contract(_) => "contract",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
