//! Command-line front end: density spec grammar, key=value config files,
//! subcommands and their exit codes.

pub mod commands;
pub mod config;
pub mod spec;

use std::fmt;
use std::io;

use isoprofile::criteria::CriteriaError;
use isoprofile::phiexp::PhiError;
use isoprofile::poincare::PoincareError;
use isoprofile::profile::ProfileError;
use isoprofile::radial::RadialError;
use isoprofile::transport::TransportError;
use thiserror::Error;

/// Process exit codes, one per failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Io = 1,
    InvalidSpec = 2,
    DivergentMass = 3,
    DisconnectedSupport = 4,
    BoundViolation = 5,
    VerificationFailure = 6,
    Precondition = 7,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("divergent mass: {0}")]
    DivergentMass(String),
    #[error("disconnected support: {0}")]
    DisconnectedSupport(String),
    #[error("bound violation: {0}")]
    BoundViolation(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Io(_) => ExitCode::Io,
            CliError::InvalidSpec(_) => ExitCode::InvalidSpec,
            CliError::DivergentMass(_) => ExitCode::DivergentMass,
            CliError::DisconnectedSupport(_) => ExitCode::DisconnectedSupport,
            CliError::BoundViolation(_) => ExitCode::BoundViolation,
            CliError::Verification(_) => ExitCode::VerificationFailure,
            CliError::Precondition(_) => ExitCode::Precondition,
        }
    }

    pub(crate) fn spec(msg: impl fmt::Display) -> Self {
        CliError::InvalidSpec(msg.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<RadialError> for CliError {
    fn from(e: RadialError) -> Self {
        match e {
            RadialError::DivergentMass | RadialError::Quadrature(_) => CliError::DivergentMass(e.to_string()),
            RadialError::Io(_) => CliError::Io(e.to_string()),
            RadialError::DimensionMismatch { .. } => CliError::Precondition(e.to_string()),
            RadialError::InvalidDensity(_) | RadialError::ZeroMass => CliError::InvalidSpec(e.to_string()),
        }
    }
}

impl From<TransportError> for CliError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::DisconnectedSupport(..) => CliError::DisconnectedSupport(e.to_string()),
            TransportError::Radial(r) => r.into(),
            TransportError::InvalidOption(_) => CliError::InvalidSpec(e.to_string()),
            TransportError::Special(_) | TransportError::OutOfRange(..) => CliError::Verification(e.to_string()),
        }
    }
}

impl From<PhiError> for CliError {
    fn from(e: PhiError) -> Self {
        match e {
            PhiError::Io(_) => CliError::Io(e.to_string()),
            PhiError::Radial(r) => r.into(),
            PhiError::Invalid(_) | PhiError::Parse(_) => CliError::InvalidSpec(e.to_string()),
        }
    }
}

impl From<CriteriaError> for CliError {
    fn from(e: CriteriaError) -> Self {
        match e {
            CriteriaError::Radial(r) => r.into(),
            CriteriaError::Precondition(m) => CliError::Precondition(m),
            CriteriaError::NonSmooth { .. } => CliError::Verification(e.to_string()),
        }
    }
}

impl From<PoincareError> for CliError {
    fn from(e: PoincareError) -> Self {
        match e {
            PoincareError::InvalidParameter(_) | PoincareError::DimensionMismatch { .. } => {
                CliError::InvalidSpec(e.to_string())
            }
            _ => CliError::Verification(e.to_string()),
        }
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::Violation { .. } => CliError::BoundViolation(e.to_string()),
            ProfileError::Precondition(m) => CliError::Precondition(m),
            ProfileError::Radial(r) => r.into(),
            ProfileError::Domain(_)
            | ProfileError::Overlap(..)
            | ProfileError::InvalidInterval(..)
            | ProfileError::OutsideSupport(_) => CliError::InvalidSpec(e.to_string()),
            ProfileError::Special(_) | ProfileError::Quadrature(_) => CliError::Verification(e.to_string()),
        }
    }
}
