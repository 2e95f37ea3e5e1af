//! Exact arithmetic for the multiplicative group generated by ratios of two
//! linear forms, together with its character-theoretic dual.

pub mod arith;
pub mod correlation;
pub mod cyclotomic;
pub mod dirichlet;
pub mod dualdet;
pub mod error;
pub mod family;
pub mod lattice;

pub use arith::{factorize, PrimeExponentMap, UnitGroupStructure};
pub use cyclotomic::{CyclotomicNumber, RootOfUnity, Target};
pub use dirichlet::{enumerate_characters, DirichletCharacter};
pub use error::{Error, Result};
pub use correlation::{corr_report, empirical_corr, euler_factor, CorrReport, EulerFactor, MultFunctionSpec};
pub use dualdet::{dual_group, dual_obstruction, presentation, s_value, DualGroup, GCharacter, GroupPresentation};
pub use family::{normalize_family, RatioFamily};
pub use lattice::{membership, parse_rational, quotient_invariants, represent, Membership, SupportPolicy};
