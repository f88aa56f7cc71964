use thiserror::Error;

/// Errors produced by the simulation and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical precondition on an input was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A lineshape has no well-defined resonance minimum (F = 0 or zero depth).
    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    /// Requested value lies outside the configured interpolation table.
    #[error("out of table: {0}")]
    OutOfTable(String),

    /// An event stream violated the sorted-timestamps contract.
    #[error("unsorted input: {0}")]
    UnsortedInput(&'static str),

    /// Two spectra do not share the same wavelength grid.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A substrate bin is zero or negative after background subtraction.
    #[error("division by zero: {0}")]
    DivisionByZero(String),

    /// The source delivers no pairs anywhere in the scan band.
    #[error("empty band: {0}")]
    EmptyBand(String),

    /// The spectrum is flat within its error bars; a lineshape fit is meaningless.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// The fit iteration broke down (non-finite model or singular system).
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A shift estimate was requested from a fit that did not converge.
    #[error("unconverged fit")]
    UnconvergedFit,

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// A spectrum or report file could not be parsed.
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
