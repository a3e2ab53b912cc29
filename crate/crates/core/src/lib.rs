//! Simulation core for a SNAIL-coupled two-cavity processor: circuit
//! model, dressed Hamiltonian, open-system dynamics, protocols,
//! tomography and error budgeting.

pub mod circuit_model;
pub mod dressed_system;
pub mod dynamics;
pub mod error_budget;
pub mod estimators;
pub mod error;
pub mod fit;
pub mod hilbert;
pub mod protocols;
pub mod tomography;
pub mod units;

pub use error::{Error, Result};
