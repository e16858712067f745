use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),
    #[error("modulus {p}^{m} exceeds the 2^40 cap")]
    ModulusTooLarge { p: u64, m: u32 },
    #[error("{a} is not a unit mod {p}^{m}")]
    NotAUnit { a: u64, p: u64, m: u32 },
    #[error("series diverges: valuation {0} below convergence range")]
    Divergent(i32),
    #[error("value carries precision {have}, need at least {need}")]
    InsufficientPrecision { have: u32, need: u32 },
    #[error("integration level {level} below declared conductor level {need}")]
    LevelTooLow { level: u32, need: u32 },
    #[error("parameter within {0} of a pole")]
    NearPole(f64),
    #[error("conductors differ: {0} vs {1}")]
    ConductorMismatch(u64, u64),
    #[error("singular argument: {0}")]
    SingularArgument(String),
    #[error("outside the fast-path regime: {0}")]
    RegimeMismatch(String),
    #[error("bad character spec: {0}")]
    BadSpec(String),
}
