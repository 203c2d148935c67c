use fairaudit_core::audit::AuditError;
use fairaudit_core::data::DataError;
use fairaudit_core::grl::GrlError;
use fairaudit_core::metrics::MetricError;
use fairaudit_core::probe::ProbeError;
use fairaudit_core::stats::StatsError;

/// Every failure maps to one of three exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration. Exit 1.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or invalid input data. Exit 2.
    #[error("{0}")]
    Data(String),
    /// Oracle or computation failure. Exit 3.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidPolicy(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<AuditError> for CliError {
    fn from(e: AuditError) -> Self {
        match e {
            AuditError::InvalidOptions(_) => CliError::Usage(e.to_string()),
            AuditError::Data(d) => d.into(),
            AuditError::NoTestRecords => CliError::Data(e.to_string()),
            AuditError::Stats(StatsError::InvalidConfig(_) | StatsError::InvalidAlpha(_)) => {
                CliError::Usage(e.to_string())
            }
            AuditError::Stats(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GrlError> for CliError {
    fn from(e: GrlError) -> Self {
        match e {
            GrlError::InvalidArchitecture(_) | GrlError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ProbeError> for CliError {
    fn from(e: ProbeError) -> Self {
        match e {
            ProbeError::BadTemplate { .. } | ProbeError::InvalidSpec(_) | ProbeError::Json { .. } => {
                CliError::Data(e.to_string())
            }
            ProbeError::BadMaskCount(_) | ProbeError::InvalidK => CliError::Usage(e.to_string()),
            ProbeError::Io { .. }
            | ProbeError::OracleFailure { .. }
            | ProbeError::MissingEntry { .. }
            | ProbeError::NonFiniteScore { .. }
            | ProbeError::Stats(_) => CliError::Runtime(e.to_string()),
        }
    }
}

/// Errors raised while reading inputs, before any oracle is involved.
pub fn input_error(e: ProbeError) -> CliError {
    match e {
        ProbeError::Io { .. } => CliError::Data(e.to_string()),
        other => other.into(),
    }
}
