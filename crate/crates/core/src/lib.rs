//! Radial two-weight reaction-diffusion equations
//!
//! `|x|^s1 u_t = Lap(u^m) + |x|^s2 u^p` in radial form, with the changes of
//! variables that relate its families, closed-form critical exponents,
//! explicit solutions, self-similar profiles found by shooting, and a
//! finite-volume integrator plus a residual oracle to check all of it.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eqmodel;
pub mod exec;
pub mod exponents;
pub mod field;
pub mod interp;
pub mod ode;
pub mod pde;
pub mod profiles;
pub mod solutions;
pub mod transforms;
pub mod wire;

pub use eqmodel::{EquationDescriptor, Family, FormKind, RawParameters, SelfSimilarForm};
pub use exec::Execution;
pub use field::Field;
