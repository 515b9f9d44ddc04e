//! Maps library errors onto the exit-code classes.

use spikelab::emden::EmdenError;
use spikelab::entire::EntireError;
use spikelab::experiment::ExperimentError;
use spikelab::field_io::FieldIoError;
use spikelab::green::GreenError;
use spikelab::profile::ProfileError;
use spikelab::scales::ScaleError;
use spikelab::solver::{SolverError, SweepError};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Validation,
    NonConvergence,
    Other,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Validation => 2,
            Kind::NonConvergence => 3,
            Kind::Other => 1,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { kind: Kind::Validation, message: message.into() }
    }

    pub fn other(message: impl Into<String>) -> Self {
        Self { kind: Kind::Other, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Which class a library error belongs to.
pub trait Classify: fmt::Display {
    fn kind(&self) -> Kind;
}

impl<E: Classify> From<E> for CliError {
    fn from(e: E) -> Self {
        Self { kind: e.kind(), message: e.to_string() }
    }
}

impl Classify for EmdenError {
    fn kind(&self) -> Kind {
        match self {
            Self::InvalidExponent(_) | Self::InvalidTolerance(_) | Self::InvalidConfig(_) | Self::OutOfRange(_) => {
                Kind::Validation
            }
            _ => Kind::NonConvergence,
        }
    }
}

impl Classify for ScaleError {
    fn kind(&self) -> Kind {
        match self {
            Self::InvalidInput(_) => Kind::Validation,
            Self::NoRootInRange { .. } => Kind::NonConvergence,
        }
    }
}

impl Classify for EntireError {
    fn kind(&self) -> Kind {
        match self {
            Self::Emden(e) => e.kind(),
            Self::QuadratureFailure(_) | Self::Integration(_) => Kind::NonConvergence,
            _ => Kind::Validation,
        }
    }
}

impl Classify for ProfileError {
    fn kind(&self) -> Kind {
        match self {
            Self::Scale(e) => e.kind(),
            Self::Quadrature(_) => Kind::NonConvergence,
            _ => Kind::Validation,
        }
    }
}

impl Classify for GreenError {
    fn kind(&self) -> Kind {
        match self {
            Self::CoincidentPoints(..) | Self::ExteriorPoint(..) | Self::InvalidConfig(_) => Kind::Validation,
            _ => Kind::NonConvergence,
        }
    }
}

impl Classify for SolverError {
    fn kind(&self) -> Kind {
        match self {
            Self::InvalidInput(_) | Self::Grid(_) => Kind::Validation,
            Self::Green(e) => e.kind(),
            Self::Scale(e) => e.kind(),
            Self::LinearSolve(_) | Self::ZeroPlasma => Kind::NonConvergence,
        }
    }
}

impl Classify for SweepError {
    fn kind(&self) -> Kind {
        match self {
            Self::Invalid(_) => Kind::Validation,
            Self::Solve { source, .. } => source.kind(),
            Self::NonConvergence { .. } => Kind::NonConvergence,
        }
    }
}

impl Classify for ExperimentError {
    fn kind(&self) -> Kind {
        match self {
            Self::Validation(_) => Kind::Validation,
            Self::Stage { .. } | Self::NonConvergence { .. } => Kind::NonConvergence,
            Self::Io { .. } => Kind::Other,
        }
    }
}

impl Classify for FieldIoError {
    fn kind(&self) -> Kind {
        match self {
            Self::Io { .. } => Kind::Other,
            Self::Format { .. } | Self::Sidecar { .. } => Kind::Validation,
        }
    }
}
