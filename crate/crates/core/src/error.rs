use std::path::PathBuf;

/// Errors produced anywhere in the attack, metric and harness pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{what} = {value} is out of range [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: usize,
        lo: usize,
        hi: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("metric {0} is undefined for this input")]
    UndefinedMetric(&'static str),

    #[error("non-finite {what} at iteration {iteration}")]
    Numeric { what: &'static str, iteration: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_k(k: usize, c: usize) -> Result<()> {
    if k == 0 || k > c {
        return Err(Error::Range {
            what: "k",
            value: k,
            lo: 1,
            hi: c,
        });
    }
    Ok(())
}
