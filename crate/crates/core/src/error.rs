use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("cannot factor zero")]
    FactorZero,
    #[error("{0} is above the certified primality bound")]
    AboveCertifiedBound(u128),
    #[error("moduli {0} and {1} are not coprime")]
    NonCoprimeModuli(u128, u128),
    #[error("{x} is not a unit modulo {m}")]
    NotAUnit { x: i128, m: u64 },
    #[error("degenerate family: aB - Ab = 0")]
    DegenerateFamily,
    #[error("leading coefficients must be positive (a = {a}, A = {big_a})")]
    NonPositiveLeading { a: i64, big_a: i64 },
    #[error("arithmetic overflow: {0}")]
    Overflow(&'static str),
    #[error("family violates the coprime/parity dichotomy")]
    DichotomyViolated,
    #[error("prime {0} cannot be captured on the requested side")]
    NotCapturable(u64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("character is not primitive (conductor {conductor}, modulus {modulus})")]
    NotPrimitive { conductor: u64, modulus: u64 },
    #[error("tail of the eta series did not stabilize at prime {0}")]
    StabilizationFailure(u64),
    #[error("torsion value at prime {0} is not determined by the available relations")]
    UnresolvedTorsion(u64),
    #[error("analytic torsion {analytic:?} disagrees with lattice torsion {oracle:?}")]
    TorsionMismatch { analytic: Vec<u64>, oracle: Vec<u64> },
    #[error("cyclotomic order {0} exceeds the configured cap")]
    OrderCap(u64),
    #[error("not representable: {0}")]
    NotRepresentable(String),
    #[error("dual characters are not closed under multiplication")]
    NotAGroup,
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
