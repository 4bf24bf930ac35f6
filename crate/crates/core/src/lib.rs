//! Periodic travelling waves and breathers in cyclic chains of coupled
//! nonlinear oscillators.
//!
//! The crate covers the whole pipeline: potentials and the chain model,
//! the linear spectrum, isotropy subgroups of the symmetry group, a
//! harmonic-balance discretisation of `2π`-periodic loops, branch
//! continuation, reduced-potential critical points for the Newton's cradle
//! chain, and time-domain checks.

pub mod cli;
pub mod continuation;
pub mod cradle;
pub mod error;
pub mod galerkin;
pub mod homogeneous;
pub mod lattice;
pub mod linalg;
pub mod potentials;
pub mod spectrum;
pub mod symmetry;
pub mod timedomain;

pub use error::{Error, Result};
