//! Dark-state purification of molecular beams.
//!
//! A Λ system `|g⟩ ↔ |e⟩ ↔ |s⟩` driven by a probe and a control laser in
//! two-photon resonance has a field-dressed eigenstate with zero energy and
//! no excited-state amplitude. Molecules that follow it feel no optical
//! dipole force; molecules in any other rotational level are off two-photon
//! resonance, follow a light-shifted branch and get deflected towards the
//! high-intensity region. This crate builds the dressed Hamiltonians,
//! propagates the internal dynamics, extracts forces and runs classical
//! beamline ensembles.

pub mod beamline;
pub mod config;
pub mod dressed;
pub mod error;
pub mod field;
pub mod hamiltonian;
pub mod linalg;
pub mod molecule;
pub mod output;
pub mod run;
pub mod tdse;
pub mod units;

pub use error::{Error, Result};
