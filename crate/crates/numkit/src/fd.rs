use crate::{NumkitError, Tensor};

/// Central-difference gradient of a scalar function. The oracle against
/// which every backward pass in this workspace is checked.
pub fn finite_difference_grad(
    f: &dyn Fn(&Tensor) -> f64,
    x: &Tensor,
    h: f64,
) -> Result<Tensor, NumkitError> {
    assert!(h > 0.0, "finite_difference_grad: h must be positive");
    let mut grad = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + h;
        let fp = f(&probe);
        probe.data_mut()[i] = orig - h;
        let fm = f(&probe);
        probe.data_mut()[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(NumkitError::NonFinite {
                op: "finite_difference_grad",
            });
        }
        grad.data_mut()[i] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Central-difference Jacobian of a vector map f: R^n -> R^m, laid out m×n.
pub fn finite_difference_jacobian(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    h: f64,
) -> Tensor {
    assert!(h > 0.0);
    let n = x.len();
    let m = f(x).len();
    let mut jac = Tensor::zeros(&[m, n]);
    let mut probe = x.to_vec();
    for j in 0..n {
        let orig = x[j];
        probe[j] = orig + h;
        let fp = f(&probe);
        probe[j] = orig - h;
        let fm = f(&probe);
        probe[j] = orig;
        for i in 0..m {
            jac.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let f = |x: &Tensor| x.data()[0] * x.data()[0];
        let g = finite_difference_grad(&f, &Tensor::vector(vec![3.0]), 1e-6).unwrap();
        assert!((g.data()[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_gives_zero_vector() {
        let f = |_: &Tensor| 4.2;
        let g = finite_difference_grad(&f, &Tensor::vector(vec![1.0, 2.0, 3.0]), 1e-6).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn pendulum_energy_gradient_at_origin_momentum_one() {
        // H(q, p) = p^2/2 - cos q at (0, 1): dH/dq = sin 0 = 0, dH/dp = 1.
        let f = |x: &Tensor| 0.5 * x.data()[1] * x.data()[1] - x.data()[0].cos();
        let g = finite_difference_grad(&f, &Tensor::vector(vec![0.0, 1.0]), 1e-6).unwrap();
        assert!(g.data()[0].abs() < 1e-9);
        assert!((g.data()[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_finite_probe_is_reported() {
        let f = |x: &Tensor| x.data()[0].sqrt(); // NaN when probed below zero
        let err = finite_difference_grad(&f, &Tensor::vector(vec![0.0]), 1e-6);
        assert!(matches!(err, Err(NumkitError::NonFinite { .. })));
    }
}
