use thiserror::Error;

/// Error type shared by all simulation and quadrature layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid velocity: |v| = {0} but the model requires |v| < 1")]
    InvalidVelocity(f64),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("numerical accuracy failure: {0}")]
    Numerical(String),

    #[error("collision sentinel at t = {time}: particles {a} and {b} at separation {separation:.6e}")]
    Collision {
        time: f64,
        a: usize,
        b: usize,
        separation: f64,
    },

    #[error("escape sentinel at t = {time}: particle {index} at distance {distance:.6e} left the bounding ball")]
    Escape {
        time: f64,
        index: usize,
        distance: f64,
    },

    #[error("resource guard: {0}")]
    ResourceGuard(String),
}

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Configuration,
    Numerical,
    Sentinel,
    ResourceGuard,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_)
            | Error::InvalidVelocity(_)
            | Error::Configuration(_) => ErrorKind::Configuration,
            Error::Numerical(_) => ErrorKind::Numerical,
            Error::Collision { .. } | Error::Escape { .. } => ErrorKind::Sentinel,
            Error::ResourceGuard(_) => ErrorKind::ResourceGuard,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
