use crate::{NumkitError, Tensor};

/// Invert a small square matrix by Gaussian elimination with partial
/// pivoting. The condition estimate is the ratio of the largest to the
/// smallest pivot magnitude; above 1e12 (or on an exactly zero pivot) the
/// matrix is reported singular.
pub fn invert_small_matrix(m: &Tensor) -> Result<Tensor, NumkitError> {
    let shape = m.shape();
    if shape.len() != 2 || shape[0] != shape[1] {
        return Err(NumkitError::BadShape {
            op: "invert_small_matrix",
            expected: "square matrix",
            got: shape.to_vec(),
        });
    }
    let n = shape[0];
    let mut a = m.data().to_vec();
    let mut inv = Tensor::eye(n).data().to_vec();

    let mut max_pivot = 0.0_f64;
    let mut min_pivot = f64::INFINITY;

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val == 0.0 {
            return Err(NumkitError::Singular { cond: f64::INFINITY });
        }
        max_pivot = max_pivot.max(pivot_val);
        min_pivot = min_pivot.min(pivot_val);
        if max_pivot / min_pivot > 1e12 {
            return Err(NumkitError::Singular { cond: max_pivot / min_pivot });
        }
        if pivot_row != col {
            for c in 0..n {
                a.swap(col * n + c, pivot_row * n + c);
                inv.swap(col * n + c, pivot_row * n + c);
            }
        }
        let p = a[col * n + col];
        for c in 0..n {
            a[col * n + c] /= p;
            inv[col * n + c] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                a[r * n + c] -= f * a[col * n + c];
                inv[r * n + c] -= f * inv[col * n + c];
            }
        }
    }
    Ok(Tensor::matrix(n, n, inv))
}
