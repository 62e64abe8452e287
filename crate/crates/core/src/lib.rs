//! Discontinuous Galerkin (SWIP) discretization of the linear acoustic wave
//! equation with a non-iterative overlapping domain-splitting time
//! integrator.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: triangle meshes, cell-set geometry, partitioning and the
//!   overlapping subdomain layout.
//! - [`dg`]: broken polynomial spaces with an orthonormal modal basis.
//! - [`swip`]: the symmetric weighted interior penalty operator and weak
//!   boundary/interface data terms.
//! - [`linalg`]: CSR matrices, preconditioned conjugate gradients.
//! - [`integrators`]: global Crank-Nicolson and leapfrog steppers.
//! - [`splitting`]: the domain-splitting step (prediction, local
//!   Crank-Nicolson, overlap exchange).
//! - [`comms`]: communication graph, round scheduling, dofmaps and the
//!   round-based exchange engine.
//! - [`harness`]: run configuration, experiment drivers and error norms.
//! - [`io`]: VTK, CSV and Matrix Market writers.

pub mod comms;
pub mod dg;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod splitting;
pub mod swip;

pub use error::{Error, Result};
