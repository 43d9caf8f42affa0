//! Criticality theory for discrete Schrödinger forms on weighted graphs.
//!
//! The crate builds quadratic forms from weighted graphs with potentials and
//! answers questions about them: resolvents and Green operators, capacity and
//! subcritical/critical classification along exhaustions, Agmon ground states,
//! Hardy weights, weak Hardy and Poincaré profiles with semigroup decay rates,
//! and the kernel-operator constructions behind excessive functions.

pub mod criticality;
pub mod error;
pub mod families;
pub mod form;
pub mod hardy;
pub mod instances;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod resolvent;
pub mod rng;
pub mod weak;

pub use error::{Error, Result};
pub use form::{build_form, GraphForm, GraphSpec, VertexFunction};
