//! Tail and moment bounds for multilinear sums of martingale differences,
//! together with the verification lab that stress-tests every bound against
//! Monte Carlo simulation and exact small-instance enumeration.
//!
//! The crate is organised around a small algebra of tail functions
//! ([`tail`]), the log-MGF/conjugate machinery ([`cramer`]), a catalog of
//! closed-form exponents ([`exponents`]), the end-to-end bound
//! constructions ([`bounds`]), U-statistic machinery over finite sample
//! spaces ([`ustat`]), coefficient-field analytics ([`coeffs`]) and the
//! simulation lab ([`mc`]).

// `!(x > 0.0)` style guards are used throughout on purpose: unlike
// `x <= 0.0` they also reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod coeffs;
pub mod cramer;
pub mod error;
pub mod exponents;
pub mod mc;
pub mod norms;
pub mod optimize;
pub mod quad;
pub mod tail;
pub mod ustat;
pub mod util;

pub use error::{Error, Result};
pub use tail::TailFunction;
