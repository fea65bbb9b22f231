use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A potential, flow or parameter was NaN or infinite.
    NonFinite(&'static str),
    InvalidArgument(String),
    /// Network failed validation; one message per violation.
    InvalidNetwork(Vec<String>),
    Unsupported(String),
    NotATree,
    /// Some constraint node has no feasible label tuple, or the DP root is infinite.
    DiscretizationInfeasible(String),
    /// Bound tightening emptied the domain of a coordinate.
    LocallyInfeasible { coord: usize },
    /// LP has no feasible point.
    Infeasible,
    /// A size guard tripped (tuples, super-nodes, enumeration, tableau).
    ResourceCap(String),
    IterationCap { iterations: usize },
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite(what) => write!(f, "non-finite {what}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::InvalidNetwork(v) => {
                write!(f, "invalid network: ")?;
                for (k, m) in v.iter().enumerate() {
                    if k > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{m}")?;
                }
                Ok(())
            }
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            Error::NotATree => write!(f, "not a tree"),
            Error::DiscretizationInfeasible(msg) => write!(f, "discretization-infeasible: {msg}"),
            Error::LocallyInfeasible { coord } => {
                write!(f, "locally-infeasible (tightening emptied coordinate {coord})")
            }
            Error::Infeasible => write!(f, "infeasible"),
            Error::ResourceCap(msg) => write!(f, "resource cap exceeded: {msg}"),
            Error::IterationCap { iterations } => {
                write!(f, "simplex iteration cap exceeded after {iterations} pivots")
            }
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
