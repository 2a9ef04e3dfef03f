use std::cell::RefCell;
use std::rc::Rc;

use crate::{NodeId, NumkitError, Op, Tape, Tensor};

/// Eagerly evaluated handle to a tape node. Cloning is cheap; all clones
/// share one tape. Shape errors panic with the primitive's name — model
/// code manages shapes statically, and the fallible surface stays on
/// [`Tape`] itself. The one runtime-fallible op is [`Var::try_inverse`].
#[derive(Clone)]
pub struct Var {
    tape: Rc<RefCell<Tape>>,
    id: NodeId,
}

impl Var {
    pub fn tape() -> Rc<RefCell<Tape>> {
        Rc::new(RefCell::new(Tape::new()))
    }

    pub fn leaf(tape: &Rc<RefCell<Tape>>, value: Tensor) -> Var {
        let id = tape.borrow_mut().leaf(value);
        Var { tape: tape.clone(), id }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    /// New leaf sharing this var's tape.
    pub fn leaf_on_same_tape(&self, value: Tensor) -> Var {
        let id = self.tape.borrow_mut().leaf(value);
        Var { tape: self.tape.clone(), id }
    }

    pub fn value(&self) -> Tensor {
        self.tape
            .borrow()
            .value(self.id)
            .expect("var is evaluated eagerly")
            .clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.borrow().shape(self.id).to_vec()
    }

    fn push(&self, op: Op) -> Var {
        let id = {
            let mut tape = self.tape.borrow_mut();
            let id = tape.push(op).unwrap_or_else(|e| panic!("{e}"));
            tape.eval_node(id).unwrap_or_else(|e| panic!("{e}"));
            id
        };
        Var { tape: self.tape.clone(), id }
    }

    pub fn add(&self, o: &Var) -> Var {
        self.push(Op::Add(self.id, o.id))
    }

    pub fn sub(&self, o: &Var) -> Var {
        self.push(Op::Sub(self.id, o.id))
    }

    pub fn mul(&self, o: &Var) -> Var {
        self.push(Op::Mul(self.id, o.id))
    }

    pub fn scale(&self, c: f64) -> Var {
        self.push(Op::Scale(self.id, c))
    }

    pub fn matmul(&self, o: &Var) -> Var {
        self.push(Op::Matmul(self.id, o.id))
    }

    pub fn transpose(&self) -> Var {
        self.push(Op::Transpose(self.id))
    }

    pub fn affine(&self, x: &Var, b: &Var) -> Var {
        self.push(Op::Affine { w: self.id, x: x.id, b: b.id })
    }

    pub fn add_bias(&self, b: &Var) -> Var {
        self.push(Op::AddBias { x: self.id, b: b.id })
    }

    pub fn relu(&self) -> Var {
        self.push(Op::Relu(self.id))
    }

    pub fn sigmoid(&self) -> Var {
        self.push(Op::Sigmoid(self.id))
    }

    pub fn abs(&self) -> Var {
        self.push(Op::Abs(self.id))
    }

    pub fn sqrt(&self) -> Var {
        self.push(Op::Sqrt(self.id))
    }

    pub fn monomial(&self, i: u32) -> Var {
        self.push(Op::Monomial(self.id, i))
    }

    pub fn sum(&self) -> Var {
        self.push(Op::Sum(self.id))
    }

    pub fn diag(&self) -> Var {
        self.push(Op::Diag(self.id))
    }

    pub fn try_inverse(&self) -> Result<Var, NumkitError> {
        let id = {
            let mut tape = self.tape.borrow_mut();
            let id = tape.push(Op::Inverse(self.id))?;
            tape.eval_node(id)?;
            id
        };
        Ok(Var { tape: self.tape.clone(), id })
    }

    pub fn concat_rows(parts: &[&Var]) -> Var {
        assert!(!parts.is_empty());
        parts[0].push(Op::ConcatRows(parts.iter().map(|v| v.id).collect()))
    }

    pub fn concat_cols(parts: &[&Var]) -> Var {
        assert!(!parts.is_empty());
        parts[0].push(Op::ConcatCols(parts.iter().map(|v| v.id).collect()))
    }

    pub fn gather_cols(&self, idx: Vec<usize>) -> Var {
        self.push(Op::GatherCols(self.id, idx))
    }

    pub fn slice_rows(&self, r0: usize, r1: usize) -> Var {
        self.push(Op::SliceRows(self.id, r0, r1))
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Var {
        self.push(Op::Reshape(self.id, shape))
    }

    /// Backward pass from this (scalar) node with seed 1.
    pub fn backward_scalar(&self) -> crate::GradMap {
        let tape = self.tape.borrow();
        tape.backward_grad(self.id, &Tensor::scalar(1.0))
            .unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn backward(&self, seed: &Tensor) -> Result<crate::GradMap, NumkitError> {
        self.tape.borrow().backward_grad(self.id, seed)
    }
}
