//! Simulation layer: time integrators, analytic and neural Hamiltonian
//! fields, 1D hyperbolic conservation-law machinery, and Lagrangian vortex
//! dynamics. Everything numeric is f64 and runs either on plain tensors or
//! on autodiff graph handles through the [`state::StateOps`] abstraction,
//! so analytic and learned fields are interchangeable inside the steppers.

pub mod error;
pub mod hamiltonian;
pub mod hyperbolic;
pub mod integrate;
pub mod state;
pub mod vortex;

pub use error::DynamicsError;
