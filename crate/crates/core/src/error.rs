use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` out of domain: {value}")]
    Domain { name: &'static str, value: f64 },

    #[error("point {point} is not in the open upper half-plane")]
    NotInUpperHalfPlane { point: Complex64 },

    #[error("newton inversion did not converge after {iterations} iterations (last iterate {last})")]
    NoConvergence { iterations: usize, last: Complex64 },

    #[error("times must be strictly increasing (violation at index {index})")]
    NonMonotoneTimes { index: usize },

    #[error("path must start at t = 0 with u = 0")]
    BadOrigin,

    #[error("mismatched lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("step {index}: {source}")]
    AtStep {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("series denominator vanished at |z| = {modulus} (gate misuse)")]
    GateMisuse { modulus: f64 },

    #[error("no radius bracket found below {limit}")]
    BracketNotFound { limit: f64 },
}

impl Error {
    pub(crate) fn at(self, index: usize) -> Error {
        Error::AtStep {
            index,
            source: alloc::boxed::Box::new(self),
        }
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { name, value })
    }
}
