//! Exclusion processes with W-conductances on the discrete torus and the
//! hydrodynamic equation `d_t rho = L_W Phi(rho)`.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conductance;
pub mod energy;
pub mod ensemble;
pub mod error;
pub mod exclusion;
pub mod field;
pub mod generator;
pub mod harness;
pub mod hydro;
pub mod profiles;

#[cfg(test)]
mod testutil;

pub use conductance::{ConductanceFunction, ConductanceProfile};
pub use error::{Error, Result};
pub use field::{Field, Lattice};
pub use generator::{Generator1D, GeneratorND};
