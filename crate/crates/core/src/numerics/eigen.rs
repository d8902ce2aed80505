use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::matrix::{cholesky, Matrix, SpdMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `A = V diag(values) Vᵀ` of a symmetric matrix.
/// Eigenvalues are ascending; `vectors` holds the eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymmetricEigen {
    /// Reassembles `V diag(f(λ)) Vᵀ`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.vectors[(i, k)] * mapped[k] * self.vectors[(j, k)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}

/// Cyclic Jacobi eigenvalue iteration for symmetric matrices.
pub fn symmetric_eigen(m: &Matrix) -> SymmetricEigen {
    let n = m.dim();
    let mut a = m.symmetrized();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = v[(row, src)];
        }
    }
    SymmetricEigen { values, vectors }
}

pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    symmetric_eigen(m).values
}

/// Eigenvalues of `a⁻¹ b`, computed through the symmetric similarity
/// `L⁻¹ b L⁻ᵀ` where `a = L Lᵀ`. Ascending.
pub fn relative_eigenvalues(a: &SpdMatrix, b: &SpdMatrix) -> Result<Vec<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let n = a.dim();
    let l = a.cholesky();
    // C = L⁻¹ B L⁻ᵀ: first W = L⁻¹ B (column by column), then C = L⁻¹ Wᵀ.
    let mut w = Matrix::zeros(n);
    let mut col = alloc::vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = b.matrix()[(i, j)];
        }
        l.solve_lower_in_place(&mut col);
        for i in 0..n {
            w[(i, j)] = col[i];
        }
    }
    let wt = w.transpose();
    let mut c = Matrix::zeros(n);
    for j in 0..n {
        for i in 0..n {
            col[i] = wt[(i, j)];
        }
        l.solve_lower_in_place(&mut col);
        for i in 0..n {
            c[(i, j)] = col[i];
        }
    }
    Ok(symmetric_eigenvalues(&c))
}

/// Projects a symmetric matrix onto `{lo·I ⪯ Σ ⪯ hi·I}` by clamping its spectrum.
/// Returns the input unchanged when it already satisfies the bounds.
pub fn clamp_spectrum(m: &Matrix, lo: f64, hi: f64) -> Result<SpdMatrix> {
    // Cheap path: PD with λ_min > lo and trace ≤ hi implies both bounds.
    if m.trace() <= hi && cholesky(&m.add_diagonal(-lo)).is_ok() {
        return SpdMatrix::new(m.clone());
    }
    let eig = symmetric_eigen(m);
    let clamped = eig.map_values(|v| v.clamp(lo, hi));
    SpdMatrix::new(clamped)
}

/// Whether `m` is positive definite with `λ_min > rel_tol · λ_max`.
pub fn is_well_conditioned_pd(m: &Matrix, rel_tol: f64) -> bool {
    if !m.is_finite() || cholesky(m).is_err() {
        return false;
    }
    let values = symmetric_eigenvalues(m);
    let (min, max) = (values[0], values[values.len() - 1]);
    max > 0.0 && min > rel_tol * max
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_eigenvalues() {
        let m = Matrix::from_diag(&[3.0, 1.0, 2.0]);
        assert_eq!(symmetric_eigenvalues(&m), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two() {
        let m = Matrix::from_rows(&[alloc::vec![2.0, 1.0], alloc::vec![1.0, 2.0]]).unwrap();
        let e = symmetric_eigen(&m);
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        assert!(e.map_values(|v| v).sub(&m).max_abs() < 1e-14);
    }

    #[test]
    fn relative_eigenvalues_identity_and_diagonal() {
        let i2 = SpdMatrix::identity(2);
        assert_eq!(relative_eigenvalues(&i2, &i2).unwrap(), [1.0, 1.0]);
        let b = SpdMatrix::from_diag(&[1.0, 4.0]).unwrap();
        let l = relative_eigenvalues(&i2, &b).unwrap();
        assert!((l[0] - 1.0).abs() < 1e-14 && (l[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn clamp_leaves_valid_matrix_alone() {
        let m = Matrix::from_diag(&[1.0, 2.0]);
        assert_eq!(clamp_spectrum(&m, 0.1, 10.0).unwrap().matrix(), &m);
        let c = clamp_spectrum(&Matrix::from_diag(&[0.01, 50.0]), 0.1, 10.0).unwrap();
        let v = symmetric_eigenvalues(c.matrix());
        assert!((v[0] - 0.1).abs() < 1e-14 && (v[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn conditioning_check() {
        assert!(is_well_conditioned_pd(&Matrix::identity(3), 1e-8));
        assert!(!is_well_conditioned_pd(&Matrix::from_diag(&[1.0, -1.0]), 1e-8));
        assert!(!is_well_conditioned_pd(&Matrix::from_diag(&[1.0, 1e-12]), 1e-8));
    }
}
