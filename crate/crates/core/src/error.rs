use alloc::string::String;
use core::fmt;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A density or parameter outside its admissible domain.
    Domain { what: &'static str, value: f64 },
    /// Malformed input data (tables, breakpoints, cells).
    InvalidInput(String),
    /// Particle positions are not strictly increasing.
    Integrity { index: usize, left: f64, right: f64 },
    /// The datum carries no mass.
    ZeroMass,
    /// Requested particle mass is below what the datum resolves.
    TooFine { ell: f64, resolution: f64 },
    /// Adaptive step size collapsed.
    StepUnderflow { t: f64, h: f64 },
    /// Two densities compared under W1 do not carry the same mass.
    MassMismatch { left: f64, right: f64 },
    /// The two W1 formulations disagree (should never happen).
    DualMismatch { quantile: f64, cdf: f64 },
    /// The reference solver needs a strictly concave flux.
    NonConcaveFlux { rho: f64 },
    /// The front tracker exceeded its interaction budget.
    InteractionLimit(usize),
    /// Query outside the time span a solution covers.
    TimeOutOfRange { t: f64, t_min: f64, t_max: f64 },
    /// Test function support not covered by the trajectory.
    Support(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Integrity { index, left, right } => write!(
                f,
                "particle ordering violated at gap {index}: x[{index}] = {left} >= x[{}] = {right}",
                index + 1
            ),
            Error::ZeroMass => f.write_str("initial datum has zero mass"),
            Error::TooFine { ell, resolution } => write!(
                f,
                "particle mass {ell:e} is below the resolvable mass increment {resolution:e}; \
                 reduce N or supply a finer datum"
            ),
            Error::StepUnderflow { t, h } => {
                write!(f, "step size underflow at t = {t} (h = {h:e})")
            }
            Error::MassMismatch { left, right } => {
                write!(f, "densities carry different mass: {left} vs {right}")
            }
            Error::DualMismatch { quantile, cdf } => write!(
                f,
                "W1 quantile form {quantile} disagrees with CDF form {cdf}"
            ),
            Error::NonConcaveFlux { rho } => {
                write!(f, "flux is not strictly concave near rho = {rho}")
            }
            Error::InteractionLimit(n) => {
                write!(f, "front tracking exceeded {n} wave interactions")
            }
            Error::TimeOutOfRange { t, t_min, t_max } => {
                write!(f, "time {t} outside [{t_min}, {t_max}]")
            }
            Error::Support(msg) => write!(f, "test function support: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
