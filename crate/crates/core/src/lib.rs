//! Repeated interaction quantum systems.
//!
//! A small system meets a chain of probes one at a time. Each encounter is a
//! unitary evolution of the joint system followed by a partial trace, giving a
//! completely positive trace-preserving reduced dynamics map. The modules
//! build these maps and study their spectra, thermodynamics, scaling limits
//! and measurement statistics.

pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod maser;
pub mod measure;
pub mod qops;
pub mod qwalk;
pub mod rdm;
pub mod spectral;
pub mod spinmodel;
pub mod thermo;
pub mod weaklimit;

pub use error::{Error, Result};
pub use qops::{CMatrix, CVector, DensityMatrix, Superoperator, Tolerances, C64};
