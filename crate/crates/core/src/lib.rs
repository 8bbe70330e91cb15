//! Quantum state tomography by linear regression estimation, in a static
//! setting (POVM frequencies) and a dynamic one (time trace of a single
//! observable under a known Hamiltonian), together with bounds on how far the
//! MSE bound moves when the measurement devices or the Hamiltonian are
//! perturbed.

pub mod basis;
pub mod config;
pub mod dynamic_lre;
pub mod error;
pub mod linalg;
pub mod output;
pub mod perturb;
pub mod sim;
pub mod static_lre;

pub use error::{Error, Result};
