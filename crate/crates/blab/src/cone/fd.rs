//! Finite-difference Jacobians with a Richardson consistency check.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Central-difference Jacobian of `f` at `point` with step `step`.
pub fn fd_jacobian<F>(f: &F, point: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = point.len();
    let probe = f(point)?;
    let m = probe.len();
    let mut j = DMatrix::zeros(m, n);
    for col in 0..n {
        let mut plus = point.clone();
        plus[col] += step;
        let mut minus = point.clone();
        minus[col] -= step;
        // Divide by the step actually realized after rounding.
        let h2 = plus[col] - minus[col];
        let fp = f(&plus)?;
        let fm = f(&minus)?;
        for row in 0..m {
            j[(row, col)] = (fp[row] - fm[row]) / h2;
        }
    }
    Ok(j)
}

/// Jacobian at step `h` together with the Richardson diagnostic: the
/// largest entry-wise difference between the `h` and `h/2` evaluations
/// (an `O(h^2)` truncation estimate).
pub fn fd_jacobian_checked<F>(
    f: &F,
    point: &DVector<f64>,
    step: f64,
) -> Result<(DMatrix<f64>, f64)>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let coarse = fd_jacobian(f, point, step)?;
    let fine = fd_jacobian(f, point, step / 2.0)?;
    let diff = (&coarse - &fine).amax();
    Ok((fine, diff))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map() {
        let f = |p: &DVector<f64>| -> Result<DVector<f64>> { Ok(p.clone()) };
        let j = fd_jacobian(&f, &DVector::from_vec(vec![0.3, -0.2]), 1e-6).unwrap();
        assert!((j - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn second_order_convergence() {
        // f(x) = (sin x0 * exp x1); third derivatives non-zero.
        let f = |p: &DVector<f64>| -> Result<DVector<f64>> {
            Ok(DVector::from_vec(vec![p[0].sin() * p[1].exp()]))
        };
        let p = DVector::from_vec(vec![0.4, -0.3]);
        let exact = DMatrix::from_row_slice(1, 2, &[
            0.4f64.cos() * (-0.3f64).exp(),
            0.4f64.sin() * (-0.3f64).exp(),
        ]);
        let e1 = (fd_jacobian(&f, &p, 1e-3).unwrap() - &exact).amax();
        let e2 = (fd_jacobian(&f, &p, 5e-4).unwrap() - &exact).amax();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.5, "ratio = {ratio}");
    }
}
