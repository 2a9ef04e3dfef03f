use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumkitError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected {expected}, got shape {got:?}")]
    BadShape {
        op: &'static str,
        expected: &'static str,
        got: Vec<usize>,
    },
    #[error("singular matrix: condition estimate {cond:.3e} exceeds 1e12")]
    Singular { cond: f64 },
    #[error("{op}: non-finite value encountered")]
    NonFinite { op: &'static str },
    #[error("backward on unevaluated graph: run forward_eval first")]
    Unevaluated,
    #[error("seed shape {seed:?} does not match root shape {root:?}")]
    SeedShape { seed: Vec<usize>, root: Vec<usize> },
}
