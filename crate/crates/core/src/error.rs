use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A constructive procedure could not satisfy one of its conditions.
    #[error("construction error: {0}")]
    Construction(String),

    /// A search hit its index cap before meeting its target.
    #[error("resource limit: {what} (cap {cap}, best achieved {achieved})")]
    Resource {
        what: String,
        cap: u64,
        achieved: f64,
    },

    /// A configuration could not be interpreted.
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn construction(msg: impl Into<String>) -> Self {
        Error::Construction(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
