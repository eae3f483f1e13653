//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by mesh construction, energy evaluation, minimization and
/// the diagnostic suites.
#[derive(Debug, Error)]
pub enum Error {
    #[error("refinement level {0} out of range (max {1})")]
    LevelOutOfRange(u32, u32),

    #[error("degenerate triangle {index}: signed area {area:e}")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("map does not live on this mesh (level/vertex/triangle counts differ)")]
    MeshMismatch,

    #[error("inadmissible map: triangle {index} has Jacobian {jac:e}")]
    InadmissibleMap { index: usize, jac: f64 },

    #[error("point location failed at vertex {vertex}: the image does not cover it at mesh resolution")]
    Coverage { vertex: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("not a circle homeomorphism: {0}")]
    NotAHomeomorphism(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("infeasible initialization: {0}")]
    InitInfeasible(String),

    #[error("line search stalled: {0}")]
    Stall(String),

    #[error("composition left the feasible set: triangle {index} has Jacobian {jac:e}")]
    Composition { index: usize, jac: f64 },

    #[error("unsupported profile: {0}")]
    UnsupportedProfile(String),

    #[error("singular argument: {0}")]
    SingularArgument(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that indicate bad input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::LevelOutOfRange(..)
                | Error::MeshMismatch
                | Error::Domain(_)
                | Error::NotAHomeomorphism(_)
                | Error::Parse(_)
                | Error::UnsupportedProfile(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
