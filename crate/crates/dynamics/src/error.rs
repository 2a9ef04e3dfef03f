use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("{op}: non-finite state")]
    NonFinite { op: &'static str },
    #[error("CFL violation: Courant number {courant:.4} exceeds 1")]
    CflViolation { courant: f64 },
    #[error("non-physical gas state at cell {cell}: density {rho:.3e}, pressure {pressure:.3e}")]
    Vacuum { cell: usize, rho: f64, pressure: f64 },
    #[error("star-pressure Newton iteration failed to converge in {0} steps")]
    NewtonDiverged(usize),
    #[error("coincident vortex pair ({i}, {j}): separation {dist:.3e}")]
    CoincidentVortices { i: usize, j: usize, dist: f64 },
    #[error(transparent)]
    Numkit(#[from] numkit::NumkitError),
    #[error("{0}")]
    Invalid(String),
}
