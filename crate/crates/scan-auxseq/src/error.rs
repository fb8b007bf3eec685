use thiserror::Error;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown word `{0}` (closed lexicon)")]
    UnknownWord(String),

    #[error("malformed command: {0}")]
    MalformedCommand(String),

    #[error("{path}:{line}: bad example line: {reason}")]
    FormatError {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("{path}:{line}: interpreter output disagrees with file actions for `{command}`")]
    OracleMismatch {
        path: String,
        line: usize,
        command: String,
    },

    #[error("subsample would select 0 examples (n={n}, fraction={fraction})")]
    EmptySubset { n: usize, fraction: f64 },

    #[error("decoder channel lengths differ: actions={actions}, aux1={aux1}, aux2={aux2}")]
    LengthMismatch {
        actions: usize,
        aux1: usize,
        aux2: usize,
    },

    #[error("unsupported auxiliary attention combination: key={key}, value={value}")]
    InvalidCombo { key: String, value: String },

    #[error("non-finite gradient in `{tensor}` at step {step}")]
    NonFiniteGradient { tensor: String, step: usize },

    #[error("checkpoint is inconsistent: {0}")]
    BadCheckpoint(String),

    #[error("config: {0}")]
    BadConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
