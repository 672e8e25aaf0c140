//! Numerical verification workbench for nonlinear Euler sums: exact harmonic
//! numbers, arbitrary-precision constants, asymptotic tail summation, an
//! identity catalog with a verifier, and PSLQ relation finding.

pub mod asym;
pub mod catalog;
pub mod constants;
pub mod eval;
pub mod exact;
pub mod expr;
pub mod hp;
pub mod pslq;
pub mod summand;
pub mod verify;

pub use catalog::{Catalog, Class, Coverage, Filter, IdentityEntry, Kind, Status};
pub use constants::{Atom, ClosedForm, Conventions, Monomial};
pub use eval::{clear_caches, evaluate_sum, EvalConfig, EvalResult};
pub use exact::{check_finite_lemma, LemmaCheck, bernoulli, harmonic, HarmKind, HarmonicCache, Rational};
pub use expr::{Expr, NumCtx};
pub use hp::{ConstantRequest, HPReal};
pub use pslq::{discover, pslq, weight_basis, zeta_basis, DiscoverConfig, PslqOutcome};
pub use summand::{Base, DenomFactor, Factor, InnerSum, Limit, SumDescriptor};
pub use verify::{consistency_check, verify, verify_all, ConsistencyRecord, Report, Verdict, VerificationRecord, VerifyOptions};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("parameter arity: {0}")]
    Arity(String),
    #[error("lookup: {0}")]
    Lookup(String),
    #[error("divergent: {0}")]
    Divergent(String),
    #[error("insufficient order: {0}")]
    InsufficientOrder(String),
    #[error("precision shortfall: {0}")]
    Shortfall(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no relation: {0}")]
    NoRelation(String),
    #[error("io: {0}")]
    Io(String),
}
