use alloc::string::String;
use core::fmt;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter or scenario violates a documented precondition.
    Config(String),
    /// A geometric query is undefined, e.g. a target coinciding with an AP.
    Geometry(String),
    /// An AP has no fingerprint exemplars to estimate beams from.
    Coverage { ap: usize },
    /// A protocol message referenced an unknown link or beam.
    Protocol(String),
    /// A value outside the domain of an analytic formula.
    Domain(String),
    /// The event engine detected an internal inconsistency.
    Simulation(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Geometry(msg) => write!(f, "geometry error: {msg}"),
            Error::Coverage { ap } => write!(f, "AP {ap} has no fingerprint exemplars"),
            Error::Protocol(msg) => write!(f, "protocol error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Simulation(msg) => write!(f, "simulation fault: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
