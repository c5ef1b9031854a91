use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid extent: x_min = {min} must be below x_max = {max}")]
    InvalidExtent { min: f64, max: f64 },
    #[error("cut-off of radius {radius} is clipped by the grid extent")]
    CutoffClipped { radius: f64 },
    #[error("resource limit: {what} = {requested} exceeds cap {cap}")]
    ResourceLimit {
        what: &'static str,
        requested: u128,
        cap: u128,
    },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("no convergence after {iterations} iterations (best residual {residual:.3e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },
    #[error("basis is not orthonormal (Gram deviation {deviation:.3e})")]
    InvalidBasis { deviation: f64 },
    #[error("screening inapplicable: support radius {support} reaches distance {distance}")]
    ScreeningInapplicable { support: f64, distance: f64 },
    #[error("invalid induced type: {0}")]
    InvalidInducedType(String),
    #[error("missing dependency: {0}")]
    DependencyMissing(String),
    #[error("support overlap {overlap:.3e} violates the disjointness precondition")]
    SupportOverlap { overlap: f64 },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("H_perp - lambda is not safely invertible (margin {margin:.3e})")]
    NotInvertible { margin: f64 },
    #[error("fixed-point iteration left the invertibility window at lambda = {lambda}")]
    WindowExit { lambda: f64 },
    #[error("boost too large: {0}")]
    BoostTooLarge(String),
    #[error("grid spacing {spacing} does not resolve the length scale {scale}")]
    Resolution { spacing: f64, scale: f64 },
    #[error("deflation failure (residual {residual:.3e})")]
    Deflation { residual: f64 },
    #[error("expansion domain violated: |z| = {radius} exceeds |y|/3 = {limit}")]
    Domain { radius: f64, limit: f64 },
    #[error("fit window error: {0}")]
    Window(String),
    #[error("rigging failed: ionic and atomic limits differ by {gap:.3e}")]
    Rigging { gap: f64 },
    #[error("property (E) holds (gamma_2 = {gamma2:.4e}); the necessity experiment needs a rigged system")]
    PropertyEHolds { gamma2: f64 },
    #[error("degenerate or ambiguous state: {0}")]
    DegenerateState(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("at R = {r}: {source}")]
    AtSeparation { r: f64, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
