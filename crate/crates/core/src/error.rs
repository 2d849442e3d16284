use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed trace at line {line}: {reason}")]
    MalformedTrace { line: usize, reason: String },

    #[error("trace has no positive throughput sample")]
    DeadTrace,

    #[error("invalid interval [{start}, {end}]")]
    InvalidInterval { start: f64, end: f64 },

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("rung {rung} out of range for a {len}-rung ladder")]
    InvalidRung { rung: usize, len: usize },

    #[error("invalid ladder: {0}")]
    InvalidLadder(String),

    #[error("no quality score for {resolution}p under metric {metric}")]
    UnknownResolution { metric: String, resolution: u32 },

    #[error("session record is empty")]
    EmptyRecord,

    #[error("reference algorithm `{0}` scored zero or is missing")]
    DegenerateReference(String),

    #[error("session already played all chunks")]
    SessionComplete,

    #[error("policy fault at chunk {chunk}: {reason}")]
    PolicyFault { chunk: usize, reason: String },

    #[error("numerical fault: {0}")]
    NumericalFault(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
