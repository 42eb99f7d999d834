use std::path::PathBuf;

use corefqa::conll::ConllError;
use corefqa::convert::ConvertError;
use corefqa::curation::CurationError;
use corefqa::dataset::DatasetError;
use corefqa::http::ServiceError;
use corefqa::metrics::MetricsError;
use corefqa::probes::ProbeError;
use corefqa_service::ServeError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Serve(#[from] ServeError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } | CliError::Data(_) => 2,
            CliError::Service(_) => 3,
            CliError::Serve(ServeError::BindError { .. }) => 3,
            CliError::Serve(_) => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Data(_) => "data",
            CliError::Service(_) => "service",
            CliError::Serve(ServeError::BindError { .. }) => "service",
            CliError::Serve(_) => "data",
        }
    }

    pub fn to_json(&self) -> String {
        json!({"error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code()}).to_string()
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ConllError> for CliError {
    fn from(e: ConllError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ProbeError> for CliError {
    fn from(e: ProbeError) -> Self {
        match e {
            ProbeError::Service(s) => CliError::Service(s),
            ProbeError::InvalidBootstrap(_) | ProbeError::UnknownTag(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ConvertError> for CliError {
    fn from(e: ConvertError) -> Self {
        match e {
            ConvertError::Service(s) => CliError::Service(s),
            ConvertError::MissingGenerator | ConvertError::UnknownMode(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<CurationError> for CliError {
    fn from(e: CurationError) -> Self {
        match e {
            CurationError::Probe(p) => p.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}
