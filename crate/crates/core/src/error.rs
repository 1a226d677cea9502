use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("not enough {what}: need {needed}, got {available} (short by {})", needed - available)]
    Deficit {
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("antenna port {0} has no entries in the pilot pattern")]
    UnknownPort(usize),

    #[error("zero pilot value at index {0}")]
    ZeroPilot(usize),

    #[error("matrix is singular and cannot be inverted")]
    Singular,

    #[error("unsupported constellation: {0}")]
    UnsupportedConstellation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trial failed (L={channel_len}, snr={snr_db} dB, trial {trial}): {source}")]
    Trial {
        channel_len: usize,
        snr_db: f64,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}
