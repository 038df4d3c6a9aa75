use std::io;

use thiserror::Error;

use seirs_core::endemic::EndemicError;
use seirs_core::model::ModelError;
use seirs_core::ode::OdeError;
use seirs_core::r0::R0Error;
use seirs_core::simulation::SimulationError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("integration: {0}")]
    Integration(String),
    #[error("analysis: {0}")]
    Analysis(String),
    #[error("output: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Integration(_) => 3,
            Self::Analysis(_) | Self::Io(_) => 1,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<OdeError> for CliError {
    fn from(e: OdeError) -> Self {
        Self::Integration(e.to_string())
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Model(m) => m.into(),
            SimulationError::NegativeInitialState(_) => Self::Config(e.to_string()),
            other => Self::Integration(other.to_string()),
        }
    }
}

impl From<R0Error> for CliError {
    fn from(e: R0Error) -> Self {
        match e {
            R0Error::Ode(_) | R0Error::Simulation(_) => Self::Integration(e.to_string()),
            R0Error::Dfe(_) | R0Error::NonFiniteSlope { .. } => Self::Config(e.to_string()),
            R0Error::BracketOverflow { .. } => Self::Analysis(e.to_string()),
        }
    }
}

impl From<EndemicError> for CliError {
    fn from(e: EndemicError) -> Self {
        match e {
            EndemicError::R0(inner) => inner.into(),
            EndemicError::Simulation(inner) => inner.into(),
            EndemicError::Ode(_) | EndemicError::NewtonStalled { .. } | EndemicError::SingularJacobian { .. } => {
                Self::Integration(e.to_string())
            }
            EndemicError::Periodic(_) => Self::Config(e.to_string()),
            _ => Self::Analysis(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.into())
    }
}
