use std::path::PathBuf;

use crate::guidance::OracleKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numeric overflow in {0}")]
    NumericOverflow(String),

    #[error("{kind} oracle unavailable{}: {detail}", endpoint_suffix(.endpoint, .status))]
    OracleUnavailable {
        kind: OracleKind,
        endpoint: Option<String>,
        status: Option<u16>,
        detail: String,
    },

    #[error("ingestion failed at frame {index}: {detail}")]
    Ingestion { index: usize, detail: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn endpoint_suffix(endpoint: &Option<String>, status: &Option<u16>) -> String {
    match (endpoint, status) {
        (Some(e), Some(s)) => format!(" at {e} (status {s})"),
        (Some(e), None) => format!(" at {e}"),
        (None, Some(s)) => format!(" (status {s})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
