//! Nonadiabatic geometric quantum gates.
//!
//! Evolves qubits under rotating-field (NMR) and flux/charge-driven
//! (Josephson charge qubit) Hamiltonians, finds cyclic states, splits their
//! phases into dynamical and geometric parts and assembles the resulting
//! one- and two-qubit gates.
//!
//! Units: `hbar = mu = 1`; fields carry energy units, time inverse energy.

pub mod error;
pub mod evolve;
pub mod experiments;
pub mod fields;
pub mod gates;
pub mod linalg;
pub mod phases;

pub use error::{Error, Result};
