//! Non-local Li-Yau and Harnack inequalities: stable heat kernels, the
//! operators `L` and `Ψ_Υ`, the Li-Yau constant, complete-graph Markov chains
//! and numerical verifiers for the associated inequalities.

pub mod core_ops;
pub mod error;
pub mod field;
pub mod harnack;
pub mod liyau_constant;
pub mod markov_graph;
pub mod nonlocal_ops;
pub mod quadrature;
pub mod singular;
pub mod special;
pub mod spline;
pub mod verifier;
pub mod stable_density;

pub use error::{Error, Result};
