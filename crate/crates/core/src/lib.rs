//! Exact iterated constant terms of products of powers of linear forms, and
//! verifiers for the constant-term identities built from them.

pub mod cli;
pub mod ct;
pub mod linform;
pub mod scalar;
pub mod verify;

pub use ct::{build_fact, build_mm, build_morris, ct_iterated, ct_once, ct_oracle_specialized, CtOrder};
pub use linform::{Expr, FactoredTerm, LinearForm, VarId};
pub use scalar::{HalfInt, PiScalar, Rational};
