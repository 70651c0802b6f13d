use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model or procedure parameter is outside its admissible range.
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// A function argument is outside the function's domain.
    Domain { what: &'static str, value: f64 },
    EmptyInput,
    PValueOutOfRange { index: usize, value: f64 },
    LengthMismatch { expected: usize, found: usize },
    /// The bandwidth rule produced `h >= 1` (too few hypotheses).
    BandwidthTooLarge { bandwidth: f64, m: usize },
    /// The alternative p-value density is not differentiable at 1 to the requested order.
    NonDifferentiable { order: u32 },
    /// `alpha` does not exceed the critical level of the procedure.
    CriticalRegime { alpha: f64, bound: f64 },
    DegenerateDenominator { value: f64 },
    ZeroVariance { feature: String },
    SubsampleTooSmall { rate: f64, n_x: usize, n_y: usize },
    InvalidData { reason: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter {
                name,
                value,
                reason,
            } => write!(f, "invalid parameter {name} = {value}: {reason}"),
            Error::Domain { what, value } => write!(f, "{what}: argument {value} outside domain"),
            Error::EmptyInput => write!(f, "empty input"),
            Error::PValueOutOfRange { index, value } => {
                write!(f, "p-value at index {index} is {value}, outside [0, 1]")
            }
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::BandwidthTooLarge { bandwidth, m } => {
                write!(f, "bandwidth {bandwidth} >= 1 for m = {m}")
            }
            Error::NonDifferentiable { order } => write!(
                f,
                "alternative p-value density is non-differentiable at 1 (order {order})"
            ),
            Error::CriticalRegime { alpha, bound } => write!(
                f,
                "critical regime: alpha = {alpha} does not exceed the critical level {bound}"
            ),
            Error::DegenerateDenominator { value } => {
                write!(f, "degenerate denominator {value} in delta-method expansion")
            }
            Error::ZeroVariance { feature } => {
                write!(f, "zero pooled variance for feature {feature}")
            }
            Error::SubsampleTooSmall { rate, n_x, n_y } => write!(
                f,
                "sampling rate {rate} gives group sizes ({n_x}, {n_y}); need at least 2 per group"
            ),
            Error::InvalidData { reason } => write!(f, "invalid data: {reason}"),
        }
    }
}

impl core::error::Error for Error {}
