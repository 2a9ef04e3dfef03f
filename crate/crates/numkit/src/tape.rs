use crate::{NumkitError, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

/// Recorded primitives. The set is fixed to what the models here need:
/// affine maps, matrix products, the factorial-scaled monomials, the usual
/// activations, elementwise arithmetic, reductions, a small-matrix inverse,
/// diagonal construction, and shape plumbing for batched evaluation.
#[derive(Debug, Clone)]
pub enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Matmul(NodeId, NodeId),
    Transpose(NodeId),
    /// w·x + b broadcast over columns.
    Affine {
        w: NodeId,
        x: NodeId,
        b: NodeId,
    },
    /// x + b broadcast over columns.
    AddBias {
        x: NodeId,
        b: NodeId,
    },
    Relu(NodeId),
    Sigmoid(NodeId),
    Abs(NodeId),
    Sqrt(NodeId),
    /// x^i / i! elementwise.
    Monomial(NodeId, u32),
    Sum(NodeId),
    /// Inverse of a small square matrix (Gaussian elimination).
    Inverse(NodeId),
    /// Vector -> diagonal matrix.
    Diag(NodeId),
    ConcatRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    /// Column gather; duplicate indices are allowed (backward scatter-adds).
    GatherCols(NodeId, Vec<usize>),
    /// Rows r0..r1 of a matrix (or slice of a vector).
    SliceRows(NodeId, usize, usize),
    Reshape(NodeId, Vec<usize>),
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    value: Option<Tensor>,
}

/// Gradients of a backward pass, keyed by node id. Shapes mirror the nodes.
#[derive(Debug)]
pub struct GradMap {
    grads: Vec<Option<Tensor>>,
}

impl GradMap {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient for `id`, or zeros of `shape` if the node was not reached.
    pub fn get_or_zeros(&self, id: NodeId, shape: &[usize]) -> Tensor {
        match self.get(id) {
            Some(t) => t.clone(),
            None => Tensor::zeros(shape),
        }
    }
}

/// Append-only computation tape. Node ids are topologically ordered by
/// construction; backward walks them once in reverse.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    /// Stored value of a node, if it has been evaluated.
    pub fn value(&self, id: NodeId) -> Option<&Tensor> {
        self.nodes[id.0].value.as_ref()
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op: Op::Leaf,
            shape: value.shape().to_vec(),
            value: Some(value),
        });
        id
    }

    /// Record `op` after validating input shapes. The value is computed
    /// lazily by [`Tape::forward_eval`] (the `Var` wrapper evaluates
    /// eagerly instead).
    pub fn push(&mut self, op: Op) -> Result<NodeId, NumkitError> {
        let shape = self.infer_shape(&op)?;
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, shape, value: None });
        Ok(id)
    }

    fn sh(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    fn rows_of(shape: &[usize]) -> usize {
        shape[0]
    }

    fn cols_of(shape: &[usize]) -> usize {
        if shape.len() == 1 {
            1
        } else {
            shape[1]
        }
    }

    fn infer_shape(&self, op: &Op) -> Result<Vec<usize>, NumkitError> {
        let same = |op_name: &'static str, a: NodeId, b: NodeId| -> Result<Vec<usize>, NumkitError> {
            if self.sh(a) != self.sh(b) {
                return Err(NumkitError::ShapeMismatch {
                    op: op_name,
                    lhs: self.sh(a).to_vec(),
                    rhs: self.sh(b).to_vec(),
                });
            }
            Ok(self.sh(a).to_vec())
        };
        match op {
            Op::Leaf => unreachable!("leaves are pushed via Tape::leaf"),
            Op::Add(a, b) => same("add", *a, *b),
            Op::Sub(a, b) => same("sub", *a, *b),
            Op::Mul(a, b) => same("mul", *a, *b),
            Op::Scale(a, _) => Ok(self.sh(*a).to_vec()),
            Op::Matmul(a, b) => {
                let (sa, sb) = (self.sh(*a), self.sh(*b));
                if sa.len() > 2 || sb.len() > 2 || Self::cols_of(sa) != Self::rows_of(sb) {
                    return Err(NumkitError::ShapeMismatch {
                        op: "matmul",
                        lhs: sa.to_vec(),
                        rhs: sb.to_vec(),
                    });
                }
                Ok(if sb.len() == 1 {
                    vec![Self::rows_of(sa)]
                } else {
                    vec![Self::rows_of(sa), Self::cols_of(sb)]
                })
            }
            Op::Transpose(a) => {
                let s = self.sh(*a);
                Ok(vec![Self::cols_of(s), Self::rows_of(s)])
            }
            Op::Affine { w, x, b } => {
                let (sw, sx, sb) = (self.sh(*w), self.sh(*x), self.sh(*b));
                if Self::cols_of(sw) != Self::rows_of(sx) {
                    return Err(NumkitError::ShapeMismatch {
                        op: "affine",
                        lhs: sw.to_vec(),
                        rhs: sx.to_vec(),
                    });
                }
                if Self::rows_of(sb) != Self::rows_of(sw) || Self::cols_of(sb) != 1 {
                    return Err(NumkitError::ShapeMismatch {
                        op: "affine bias",
                        lhs: sw.to_vec(),
                        rhs: sb.to_vec(),
                    });
                }
                Ok(if sx.len() == 1 {
                    vec![Self::rows_of(sw)]
                } else {
                    vec![Self::rows_of(sw), Self::cols_of(sx)]
                })
            }
            Op::AddBias { x, b } => {
                let (sx, sb) = (self.sh(*x), self.sh(*b));
                if Self::rows_of(sb) != Self::rows_of(sx) || Self::cols_of(sb) != 1 {
                    return Err(NumkitError::ShapeMismatch {
                        op: "add_bias",
                        lhs: sx.to_vec(),
                        rhs: sb.to_vec(),
                    });
                }
                Ok(sx.to_vec())
            }
            Op::Relu(a) | Op::Sigmoid(a) | Op::Abs(a) | Op::Sqrt(a) | Op::Monomial(a, _) => {
                Ok(self.sh(*a).to_vec())
            }
            Op::Sum(_) => Ok(vec![1]),
            Op::Inverse(a) => {
                let s = self.sh(*a);
                if s.len() != 2 || s[0] != s[1] {
                    return Err(NumkitError::BadShape {
                        op: "inverse",
                        expected: "square matrix",
                        got: s.to_vec(),
                    });
                }
                Ok(s.to_vec())
            }
            Op::Diag(a) => {
                let s = self.sh(*a);
                if s.len() != 1 {
                    return Err(NumkitError::BadShape {
                        op: "diag",
                        expected: "vector",
                        got: s.to_vec(),
                    });
                }
                Ok(vec![s[0], s[0]])
            }
            Op::ConcatRows(ids) => {
                let cols = Self::cols_of(self.sh(ids[0]));
                let mut rows = 0;
                for id in ids {
                    if Self::cols_of(self.sh(*id)) != cols {
                        return Err(NumkitError::ShapeMismatch {
                            op: "concat_rows",
                            lhs: self.sh(ids[0]).to_vec(),
                            rhs: self.sh(*id).to_vec(),
                        });
                    }
                    rows += Self::rows_of(self.sh(*id));
                }
                Ok(vec![rows, cols])
            }
            Op::ConcatCols(ids) => {
                let rows = Self::rows_of(self.sh(ids[0]));
                let mut cols = 0;
                for id in ids {
                    if Self::rows_of(self.sh(*id)) != rows {
                        return Err(NumkitError::ShapeMismatch {
                            op: "concat_cols",
                            lhs: self.sh(ids[0]).to_vec(),
                            rhs: self.sh(*id).to_vec(),
                        });
                    }
                    cols += Self::cols_of(self.sh(*id));
                }
                Ok(vec![rows, cols])
            }
            Op::GatherCols(a, idx) => {
                let s = self.sh(*a);
                let cols = Self::cols_of(s);
                if idx.iter().any(|&i| i >= cols) {
                    return Err(NumkitError::BadShape {
                        op: "gather_cols",
                        expected: "indices within column count",
                        got: s.to_vec(),
                    });
                }
                Ok(vec![Self::rows_of(s), idx.len()])
            }
            Op::SliceRows(a, r0, r1) => {
                let s = self.sh(*a);
                if *r1 > Self::rows_of(s) || r0 >= r1 {
                    return Err(NumkitError::BadShape {
                        op: "slice_rows",
                        expected: "row range within bounds",
                        got: s.to_vec(),
                    });
                }
                Ok(if s.len() == 1 {
                    vec![r1 - r0]
                } else {
                    vec![r1 - r0, s[1]]
                })
            }
            Op::Reshape(a, shape) => {
                let n: usize = self.sh(*a).iter().product();
                if shape.iter().product::<usize>() != n {
                    return Err(NumkitError::BadShape {
                        op: "reshape",
                        expected: "same element count",
                        got: shape.clone(),
                    });
                }
                Ok(shape.clone())
            }
        }
    }

    fn compute(&self, op: &Op) -> Result<Tensor, NumkitError> {
        let v = |id: NodeId| self.nodes[id.0].value.as_ref().expect("input evaluated");
        Ok(match op {
            Op::Leaf => unreachable!(),
            Op::Add(a, b) => v(*a).zip(v(*b), "add", |x, y| x + y),
            Op::Sub(a, b) => v(*a).zip(v(*b), "sub", |x, y| x - y),
            Op::Mul(a, b) => v(*a).zip(v(*b), "mul", |x, y| x * y),
            Op::Scale(a, c) => v(*a).map(|x| x * c),
            Op::Matmul(a, b) => v(*a).matmul(v(*b))?,
            Op::Transpose(a) => v(*a).transpose(),
            Op::Affine { w, x, b } => {
                let mut out = v(*w).matmul(v(*x))?;
                add_bias_in_place(&mut out, v(*b));
                out
            }
            Op::AddBias { x, b } => {
                let mut out = v(*x).clone();
                add_bias_in_place(&mut out, v(*b));
                out
            }
            Op::Relu(a) => v(*a).map(|x| x.max(0.0)),
            Op::Sigmoid(a) => v(*a).map(sigmoid),
            Op::Abs(a) => v(*a).map(f64::abs),
            Op::Sqrt(a) => v(*a).map(f64::sqrt),
            Op::Monomial(a, i) => {
                let scale = 1.0 / factorial(*i);
                v(*a).map(|x| x.powi(*i as i32) * scale)
            }
            Op::Sum(a) => Tensor::scalar(v(*a).sum()),
            Op::Inverse(a) => crate::linalg::invert_small_matrix(v(*a))?,
            Op::Diag(a) => {
                let x = v(*a);
                let n = x.len();
                let mut out = Tensor::zeros(&[n, n]);
                for i in 0..n {
                    out.data_mut()[i * n + i] = x.data()[i];
                }
                out
            }
            Op::ConcatRows(ids) => {
                let cols = v(ids[0]).cols();
                let mut data = Vec::new();
                for id in ids {
                    data.extend_from_slice(v(*id).data());
                }
                let rows = data.len() / cols;
                Tensor::matrix(rows, cols, data)
            }
            Op::ConcatCols(ids) => {
                let rows = v(ids[0]).rows();
                let total: usize = ids.iter().map(|id| v(*id).cols()).sum();
                let mut out = Tensor::zeros(&[rows, total]);
                let mut c0 = 0;
                for id in ids {
                    let t = v(*id);
                    let c = t.cols();
                    for r in 0..rows {
                        for j in 0..c {
                            out.set(r, c0 + j, t.at(r, j));
                        }
                    }
                    c0 += c;
                }
                out
            }
            Op::GatherCols(a, idx) => {
                let t = v(*a);
                let rows = t.rows();
                let mut out = Tensor::zeros(&[rows, idx.len()]);
                for (j, &src) in idx.iter().enumerate() {
                    for r in 0..rows {
                        out.set(r, j, t.at(r, src));
                    }
                }
                out
            }
            Op::SliceRows(a, r0, r1) => {
                let t = v(*a);
                let cols = t.cols();
                let data = t.data()[r0 * cols..r1 * cols].to_vec();
                if t.shape().len() == 1 {
                    Tensor::vector(data)
                } else {
                    Tensor::matrix(r1 - r0, cols, data)
                }
            }
            Op::Reshape(a, shape) => Tensor::new(shape.clone(), v(*a).data().to_vec()),
        })
    }

    /// Evaluate `id` (memoizing intermediates) and return its value.
    pub(crate) fn eval_node(&mut self, id: NodeId) -> Result<Tensor, NumkitError> {
        for i in 0..=id.0 {
            if self.nodes[i].value.is_none() {
                let val = self.compute(&self.nodes[i].op.clone())?;
                self.nodes[i].value = Some(val);
            }
        }
        Ok(self.nodes[id.0].value.clone().unwrap())
    }

    /// Recompute the graph below `root` from its leaves and return the root
    /// value. Deterministic: repeated calls on the same bound graph are
    /// bit-identical.
    pub fn forward_eval(&mut self, root: NodeId) -> Result<Tensor, NumkitError> {
        for i in 0..=root.0 {
            if !matches!(self.nodes[i].op, Op::Leaf) {
                let val = self.compute(&self.nodes[i].op.clone())?;
                self.nodes[i].value = Some(val);
            }
        }
        Ok(self.nodes[root.0].value.clone().unwrap())
    }

    /// Reverse pass from `root` seeded with `seed` (gradients of root·seed).
    /// Requires the graph to have been evaluated.
    pub fn backward_grad(&self, root: NodeId, seed: &Tensor) -> Result<GradMap, NumkitError> {
        let root_node = &self.nodes[root.0];
        let Some(root_val) = root_node.value.as_ref() else {
            return Err(NumkitError::Unevaluated);
        };
        if seed.shape() != root_val.shape() {
            return Err(NumkitError::SeedShape {
                seed: seed.shape().to_vec(),
                root: root_val.shape().to_vec(),
            });
        }
        for node in &self.nodes[..=root.0] {
            if node.value.is_none() {
                return Err(NumkitError::Unevaluated);
            }
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(seed.clone());

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].clone() else { continue };
            let v = |id: NodeId| self.nodes[id.0].value.as_ref().unwrap();
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    acc(&mut grads, *a, g.zip(v(*b), "mul", |x, y| x * y));
                    acc(&mut grads, *b, g.zip(v(*a), "mul", |x, y| x * y));
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    acc(&mut grads, *a, g.map(|x| x * c));
                }
                Op::Matmul(a, b) => {
                    let ga = g.matmul(&v(*b).transpose()).unwrap();
                    let gb = v(*a).transpose().matmul(&g).unwrap();
                    acc(&mut grads, *a, reshape_like(ga, v(*a)));
                    acc(&mut grads, *b, reshape_like(gb, v(*b)));
                }
                Op::Transpose(a) => {
                    acc(&mut grads, *a, reshape_like(g.transpose(), v(*a)));
                }
                Op::Affine { w, x, b } => {
                    let gw = g.matmul(&v(*x).transpose()).unwrap();
                    let gx = v(*w).transpose().matmul(&g).unwrap();
                    acc(&mut grads, *w, reshape_like(gw, v(*w)));
                    acc(&mut grads, *x, reshape_like(gx, v(*x)));
                    acc(&mut grads, *b, reshape_like(row_sum(&g), v(*b)));
                }
                Op::AddBias { x, b } => {
                    acc(&mut grads, *x, g.clone());
                    acc(&mut grads, *b, reshape_like(row_sum(&g), v(*b)));
                }
                Op::Relu(a) => {
                    acc(&mut grads, *a, g.zip(v(*a), "relu'", |gy, x| if x > 0.0 { gy } else { 0.0 }));
                }
                Op::Sigmoid(a) => {
                    let y = self.nodes[i].value.as_ref().unwrap();
                    acc(&mut grads, *a, g.zip(y, "sigmoid'", |gy, s| gy * s * (1.0 - s)));
                }
                Op::Abs(a) => {
                    // subgradient at 0 fixed to 0
                    acc(&mut grads, *a, g.zip(v(*a), "abs'", |gy, x| gy * sign0(x)));
                }
                Op::Sqrt(a) => {
                    let y = self.nodes[i].value.as_ref().unwrap();
                    acc(&mut grads, *a, g.zip(y, "sqrt'", |gy, s| gy * 0.5 / s));
                }
                Op::Monomial(a, k) => {
                    let k = *k;
                    let d = if k == 0 {
                        g.map(|_| 0.0)
                    } else {
                        let scale = 1.0 / factorial(k - 1);
                        g.zip(v(*a), "monomial'", move |gy, x| gy * x.powi(k as i32 - 1) * scale)
                    };
                    acc(&mut grads, *a, d);
                }
                Op::Sum(a) => {
                    let gy = g.item();
                    acc(&mut grads, *a, v(*a).map(|_| gy));
                }
                Op::Inverse(a) => {
                    // d(X^-1) = -X^-1 dX X^-1  =>  gX = -Y^T G Y^T
                    let y_t = self.nodes[i].value.as_ref().unwrap().transpose();
                    let gx = y_t.matmul(&g).unwrap().matmul(&y_t).unwrap().map(|x| -x);
                    acc(&mut grads, *a, gx);
                }
                Op::Diag(a) => {
                    let n = v(*a).len();
                    let mut d = Tensor::zeros(&[n]);
                    for j in 0..n {
                        d.data_mut()[j] = g.at(j, j);
                    }
                    acc(&mut grads, *a, d);
                }
                Op::ConcatRows(ids) => {
                    let cols = g.cols();
                    let mut r0 = 0;
                    for id in ids.clone() {
                        let t = v(id);
                        let r = t.rows();
                        let block = Tensor::new(
                            t.shape().to_vec(),
                            g.data()[r0 * cols..(r0 + r) * cols].to_vec(),
                        );
                        acc(&mut grads, id, block);
                        r0 += r;
                    }
                }
                Op::ConcatCols(ids) => {
                    let rows = g.rows();
                    let mut c0 = 0;
                    for id in ids.clone() {
                        let t = v(id);
                        let c = t.cols();
                        let mut block = Tensor::zeros(t.shape());
                        for r in 0..rows {
                            for j in 0..c {
                                let val = g.at(r, c0 + j);
                                block.data_mut()[r * c + j] = val;
                            }
                        }
                        acc(&mut grads, id, block);
                        c0 += c;
                    }
                }
                Op::GatherCols(a, idx) => {
                    let src = v(*a);
                    let mut gx = Tensor::zeros(src.shape());
                    let rows = src.rows();
                    for (j, &dst) in idx.iter().enumerate() {
                        for r in 0..rows {
                            let cur = gx.at(r, dst);
                            gx.set(r, dst, cur + g.at(r, j));
                        }
                    }
                    acc(&mut grads, *a, gx);
                }
                Op::SliceRows(a, r0, r1) => {
                    let src = v(*a);
                    let cols = src.cols();
                    let mut gx = Tensor::zeros(src.shape());
                    gx.data_mut()[r0 * cols..r1 * cols].copy_from_slice(g.data());
                    acc(&mut grads, *a, gx);
                }
                Op::Reshape(a, _) => {
                    acc(&mut grads, *a, Tensor::new(v(*a).shape().to_vec(), g.data().to_vec()));
                }
            }
        }
        Ok(GradMap { grads })
    }
}

fn add_bias_in_place(out: &mut Tensor, b: &Tensor) {
    let (rows, cols) = (out.rows(), out.cols());
    assert_eq!(b.len(), rows, "add_bias: bias length {} vs {} rows", b.len(), rows);
    for r in 0..rows {
        let bv = b.data()[r];
        for c in 0..cols {
            out.data_mut()[r * cols + c] += bv;
        }
    }
}

fn acc(grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
    match &mut grads[id.0] {
        Some(t) => {
            let sum = t.zip(&delta, "grad-acc", |a, b| a + b);
            *t = sum;
        }
        slot @ None => *slot = Some(delta),
    }
}

fn reshape_like(t: Tensor, like: &Tensor) -> Tensor {
    if t.shape() == like.shape() {
        t
    } else {
        Tensor::new(like.shape().to_vec(), t.data().to_vec())
    }
}

fn row_sum(g: &Tensor) -> Tensor {
    let (rows, cols) = (g.rows(), g.cols());
    let mut out = Tensor::zeros(&[rows]);
    for r in 0..rows {
        let mut s = 0.0;
        for c in 0..cols {
            s += g.at(r, c);
        }
        out.data_mut()[r] = s;
    }
    out
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn factorial(i: u32) -> f64 {
    (1..=i).fold(1.0, |acc, k| acc * k as f64)
}
