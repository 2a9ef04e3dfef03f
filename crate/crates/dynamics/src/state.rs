use numkit::{Tensor, Var};

/// Linear-space operations a time stepper needs from its state. Implemented
/// by plain tensors (simulation) and by tape handles (training), so one
/// stepper implementation serves both.
pub trait StateOps: Clone {
    /// self + a·x
    fn add_scaled(&self, a: f64, x: &Self) -> Self;
    /// a·self + b·y
    fn lincomb(&self, a: f64, b: f64, y: &Self) -> Self;
    fn all_finite(&self) -> bool;
}

impl StateOps for Tensor {
    fn add_scaled(&self, a: f64, x: &Self) -> Self {
        self.zip(x, "add_scaled", |s, v| s + a * v)
    }

    fn lincomb(&self, a: f64, b: f64, y: &Self) -> Self {
        self.zip(y, "lincomb", |s, v| a * s + b * v)
    }

    fn all_finite(&self) -> bool {
        Tensor::all_finite(self)
    }
}

impl StateOps for Var {
    fn add_scaled(&self, a: f64, x: &Self) -> Self {
        self.add(&x.scale(a))
    }

    fn lincomb(&self, a: f64, b: f64, y: &Self) -> Self {
        self.scale(a).add(&y.scale(b))
    }

    fn all_finite(&self) -> bool {
        self.value().all_finite()
    }
}
