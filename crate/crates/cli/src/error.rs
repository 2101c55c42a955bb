use thinlab_core::congruence::CongruenceError;
use thinlab_core::expander::ExpanderError;
use thinlab_core::geometry::GeometryError;
use thinlab_core::spectral::SpectralError;
use thinlab_core::symbolic::SymbolicError;
use thinlab_core::thermo::ThermoError;
use thiserror::Error;

/// Failures, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: configuration, group or parameters.
    #[error("{0}")]
    Validation(String),
    /// An iteration or root search failed.
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) | CliError::Json(_) | CliError::Csv(_) => 1,
        }
    }

    fn validation(e: impl ToString) -> Self {
        CliError::Validation(e.to_string())
    }

    fn numerical(e: impl ToString) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::PoleHit(_) | GeometryError::Overflow => CliError::numerical(e),
            _ => CliError::validation(e),
        }
    }
}

impl From<SymbolicError> for CliError {
    fn from(e: SymbolicError) -> Self {
        CliError::validation(e)
    }
}

impl From<ThermoError> for CliError {
    fn from(e: ThermoError) -> Self {
        match e {
            ThermoError::NoConvergence(_) | ThermoError::RootNotBracketed(..) => CliError::numerical(e),
            ThermoError::Symbolic(e) => e.into(),
            _ => CliError::validation(e),
        }
    }
}

impl From<CongruenceError> for CliError {
    fn from(e: CongruenceError) -> Self {
        match e {
            CongruenceError::NoConvergence => CliError::numerical(e),
            _ => CliError::validation(e),
        }
    }
}

impl From<ExpanderError> for CliError {
    fn from(e: ExpanderError) -> Self {
        match e {
            ExpanderError::Congruence(e) => e.into(),
            ExpanderError::Symbolic(e) => e.into(),
            ExpanderError::Thermo(e) => e.into(),
            _ => CliError::validation(e),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Eigen => CliError::numerical(e),
            SpectralError::Symbolic(e) => e.into(),
            SpectralError::Congruence(e) => e.into(),
            SpectralError::Expander(e) => e.into(),
            SpectralError::Thermo(e) => e.into(),
            _ => CliError::validation(e),
        }
    }
}
