//! Numerical core for entropy functionals, conjugate heat flows and
//! Wasserstein transport on reduced-symmetry Ricci flows.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conjugate_heat;
pub mod discretization;
pub mod entropy;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod lsi;
pub mod snapshot;
pub mod transport;

pub use error::{Error, Result};
