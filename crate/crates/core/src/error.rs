use thiserror::Error;

use crate::comms::CommError;
use crate::dg::DgError;
use crate::harness::ConfigError;
use crate::integrators::IntegratorError;
use crate::linalg::LinalgError;
use crate::mesh::MeshError;
use crate::splitting::SplitError;
use crate::swip::SwipError;

/// Crate-level error. Each module has its own error enum; this one only
/// aggregates them so that drivers can use `?` across module boundaries.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Dg(#[from] DgError),
    #[error(transparent)]
    Swip(#[from] SwipError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit status classes used by the command line harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Config,
    Solver,
    Instability,
    Other,
}

impl Error {
    pub fn exit_class(&self) -> ExitClass {
        match self {
            Error::Config(_) | Error::Mesh(_) => ExitClass::Config,
            Error::Linalg(_) => ExitClass::Solver,
            Error::Integrator(e) => integrator_class(e),
            Error::Split(SplitError::Subdomain { source, .. }) => integrator_class(source),
            Error::Split(SplitError::Linalg { .. }) => ExitClass::Solver,
            _ => ExitClass::Other,
        }
    }
}

fn integrator_class(e: &IntegratorError) -> ExitClass {
    match e {
        IntegratorError::Instability { .. } | IntegratorError::CflViolation { .. } => {
            ExitClass::Instability
        }
        IntegratorError::Solver(_) | IntegratorError::NotConverged { .. } => ExitClass::Solver,
        _ => ExitClass::Other,
    }
}
