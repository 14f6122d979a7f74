use core::fmt;

/// Errors raised for inputs outside a function's domain or configurations
/// that violate their invariants.
///
/// A key rate of zero is *not* an error; see
/// [`AbortReason`](crate::security::AbortReason).
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A scalar argument is outside the domain of the function.
    Domain { what: &'static str, value: f64 },
    /// The channel description violates an invariant.
    InvalidChannel(&'static str),
    /// The source parameter vector violates an invariant.
    InvalidParameters(&'static str),
    /// The protocol settings violate an invariant.
    InvalidProtocol(&'static str),
    /// The swarm settings violate an invariant.
    InvalidPso(&'static str),
    /// The average response probability underflowed to zero.
    DegenerateChannel,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what}: argument {value} out of domain"),
            Error::InvalidChannel(msg) => write!(f, "invalid channel: {msg}"),
            Error::InvalidParameters(msg) => write!(f, "invalid parameter vector: {msg}"),
            Error::InvalidProtocol(msg) => write!(f, "invalid protocol config: {msg}"),
            Error::InvalidPso(msg) => write!(f, "invalid swarm config: {msg}"),
            Error::DegenerateChannel => {
                f.write_str("degenerate channel: response probability is zero")
            }
        }
    }
}

impl core::error::Error for Error {}
