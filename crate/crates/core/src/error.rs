use alloc::string::String;

use crate::lattice::Site;

/// Errors raised by the lattice, exact and expansion routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unresolved neighbor: no value available at {0}")]
    UnresolvedNeighbor(Site),
    #[error("not an admissible thinned configuration: occupied sites {0} and {1} are adjacent")]
    NotAdmissible(Site, Site),
    #[error("site {0} is not in the unfixed area")]
    NotInUnfixedArea(Site),
    #[error("window too large: {free} free sites exceeds the cap of {cap}")]
    WindowTooLarge { free: usize, cap: usize },
    #[error("no feasible configuration")]
    NoFeasibleConfiguration,
    #[error("illegitimate boundary: the conditioning event has no preimage")]
    IllegitimateBoundary,
    #[error("zero denominator at p = {0}")]
    ZeroDenominator(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("constraint site {0} can be isolated but has no free neighbor")]
    UncoveredConstraint(Site),
    #[error("all admissibility flags are false")]
    EmptyClass,
    #[error("no root of the threshold equation in the bracket")]
    NoRoot,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
