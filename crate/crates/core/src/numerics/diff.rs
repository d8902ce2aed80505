use alloc::vec;
use alloc::vec::Vec;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Base step for central-difference gradients, `h_j = 1e-5 · max(1, |x_j|)`.
pub const GRADIENT_STEP: f64 = 1e-5;
/// Base step for central-difference Hessians, `h_j = 1e-4 · max(1, |x_j|)`.
pub const HESSIAN_STEP: f64 = 1e-4;

#[inline]
fn step(base: f64, xj: f64) -> f64 {
    base * xj.abs().max(1.0)
}

fn checked(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteValue("finite-difference stencil"))
    }
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient<F>(f: F, x: &[f64], base_step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for j in 0..x.len() {
        let h = step(base_step, x[j]);
        probe[j] = x[j] + h;
        let fp = checked(f(&probe))?;
        probe[j] = x[j] - h;
        let fm = checked(f(&probe))?;
        probe[j] = x[j];
        grad[j] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Central-difference Hessian of a scalar field, symmetrized.
pub fn fd_hessian<F>(f: F, x: &[f64], base_step: f64) -> Result<Matrix>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let f0 = checked(f(x))?;
    let h: Vec<f64> = x.iter().map(|&v| step(base_step, v)).collect();
    let mut probe = x.to_vec();
    let mut hess = Matrix::zeros(n);
    for j in 0..n {
        probe[j] = x[j] + h[j];
        let fp = checked(f(&probe))?;
        probe[j] = x[j] - h[j];
        let fm = checked(f(&probe))?;
        probe[j] = x[j];
        hess[(j, j)] = (fp - 2.0 * f0 + fm) / (h[j] * h[j]);
        for k in (j + 1)..n {
            let mut corner = |sj: f64, sk: f64| {
                probe[j] = x[j] + sj * h[j];
                probe[k] = x[k] + sk * h[k];
                let v = f(&probe);
                probe[j] = x[j];
                probe[k] = x[k];
                checked(v)
            };
            let fpp = corner(1.0, 1.0)?;
            let fpm = corner(1.0, -1.0)?;
            let fmp = corner(-1.0, 1.0)?;
            let fmm = corner(-1.0, -1.0)?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[j] * h[k]);
            hess[(j, k)] = v;
            hess[(k, j)] = v;
        }
    }
    Ok(hess)
}

/// Hessian from central differences of an analytic gradient, symmetrized.
/// Needs `2d` gradient calls instead of `O(d²)` function calls.
pub fn fd_hessian_from_gradient<G>(grad: G, x: &[f64], base_step: f64) -> Result<Matrix>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut probe = x.to_vec();
    let mut hess = Matrix::zeros(n);
    for j in 0..n {
        let h = step(base_step, x[j]);
        probe[j] = x[j] + h;
        let gp = grad(&probe);
        probe[j] = x[j] - h;
        let gm = grad(&probe);
        probe[j] = x[j];
        for k in 0..n {
            hess[(k, j)] = checked((gp[k] - gm[k]) / (2.0 * h))?;
        }
    }
    Ok(hess.symmetrized())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn quadratic_gradient() {
        let g = fd_gradient(sq, &[1.0, 2.0], GRADIENT_STEP).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6 && (g[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_hessian() {
        let h = fd_hessian(sq, &[1.0, 2.0], HESSIAN_STEP).unwrap();
        assert!(h.sub(&Matrix::scaled_identity(2, 2.0)).max_abs() < 1e-4);
        let h2 = fd_hessian_from_gradient(|x| x.iter().map(|v| 2.0 * v).collect(), &[1.0, 2.0], HESSIAN_STEP)
            .unwrap();
        assert!(h2.sub(&Matrix::scaled_identity(2, 2.0)).max_abs() < 1e-8);
    }

    #[test]
    fn mixed_partials() {
        let f = |x: &[f64]| x[0] * x[0] * x[1] + 3.0 * x[0] * x[1];
        let h = fd_hessian(f, &[0.5, -1.0], HESSIAN_STEP).unwrap();
        // ∂²/∂x0² = 2 x1, ∂²/∂x0∂x1 = 2 x0 + 3, ∂²/∂x1² = 0
        assert!((h[(0, 0)] + 2.0).abs() < 1e-4);
        assert!((h[(0, 1)] - 4.0).abs() < 1e-4);
        assert!(h[(1, 1)].abs() < 1e-4);
    }

    #[test]
    fn non_finite_stencil_is_an_error() {
        let f = |x: &[f64]| if x[0] > 0.0 { f64::NEG_INFINITY } else { 0.0 };
        assert_eq!(
            fd_gradient(f, &[0.0], GRADIENT_STEP),
            Err(Error::NonFiniteValue("finite-difference stencil"))
        );
        assert!(fd_hessian(f, &[0.0], HESSIAN_STEP).is_err());
    }
}
