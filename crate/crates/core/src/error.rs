use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value {value} in {what} at index {index}")]
    NonFinite {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config field `{field}`: {constraint}")]
    Config { field: String, constraint: String },

    #[error("latent {latent} out of range for K = {k}")]
    LatentOutOfRange { latent: usize, k: usize },

    #[error("gather reset failed: could not place ball {ball} after {attempts} samples")]
    SpawnFailure { ball: usize, attempts: usize },

    #[error("likelihood ratio overflow at sample {index}: log-ratio {log_ratio}")]
    RatioOverflow { index: usize, log_ratio: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("architecture mismatch: expected [{expected}], checkpoint has [{found}]")]
    Architecture { expected: String, found: String },

    #[error("schema mismatch in {path}: column `{column}`")]
    Schema { path: PathBuf, column: String },

    #[error("missing input: {0}")]
    MissingInput(PathBuf),

    #[error("config parse: {0}")]
    ConfigParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable short name used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "non_finite",
            Error::Dimension { .. } => "dimension",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config { .. } => "config",
            Error::LatentOutOfRange { .. } => "latent_out_of_range",
            Error::SpawnFailure { .. } => "spawn_failure",
            Error::RatioOverflow { .. } => "ratio_overflow",
            Error::Checkpoint(_) => "checkpoint",
            Error::Architecture { .. } => "architecture",
            Error::Schema { .. } => "schema",
            Error::MissingInput(_) => "missing_input",
            Error::ConfigParse(_) => "config_parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            what,
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}
