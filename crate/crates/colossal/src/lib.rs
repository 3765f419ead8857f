//! Enumeration and classification of colossally abundant (CA) numbers.
//!
//! A CA number maximizes sigma(n)/n^(1+eps) over all integers for some
//! eps > 0. Sweeping eps downward through its critical values F(p,k)
//! produces the CA numbers in increasing order, one prime-power bump at a
//! time. This crate enumerates that sequence, classifies each CA number by
//! the position of log n relative to its largest prime factor and the next
//! prime (CA1/CA2/CA3), evaluates G(n) = rho(n)/log log n against the Robin
//! bound e^gamma, and numerically verifies a family of related inequalities
//! over the generated records.

pub mod bounds;
pub mod checkpoint;
pub mod cli;
pub mod critical;
pub mod extreal;
pub mod generator;
pub mod primes;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sieve exhausted: needed {needed}, sieve limit {limit}")]
    SieveExhausted { needed: u64, limit: u64 },
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("unresolved classification at index {index}: log n = {log_n} within error radius of {boundary}")]
    UnresolvedClass {
        index: u64,
        log_n: String,
        boundary: u64,
    },
    #[error("stream order violation: {0}")]
    StreamOrderViolation(String),
    #[error("ambiguous integer boundary: {0}")]
    AmbiguousBoundary(String),
    #[error("unresolved ordering of F({p1},{k1}) and F({p2},{k2}) at maximum precision")]
    UnresolvedTie { p1: u64, k1: u32, p2: u64, k2: u32 },
    #[error("accumulator drift at index {index}: {what} incremental {incremental} vs fresh {fresh}")]
    Drift {
        index: u64,
        what: &'static str,
        incremental: f64,
        fresh: f64,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
