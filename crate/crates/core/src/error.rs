//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    EdgeList {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("quantization error: {0}")]
    Quant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("simulation contract violated: {0}")]
    Contract(String),

    #[error("deadlock at cycle {cycle}: {in_flight} node(s) in flight with an empty event queue")]
    Deadlock {
        cycle: u64,
        in_flight: usize,
        /// Pre-rendered transition log, one line per state change, for
        /// post-mortem dumps.
        trace_dump: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
