//! Dense symmetric linear algebra, finite differences and scalar special functions.

mod diff;
mod eigen;
mod matrix;
pub mod special;

pub use diff::{fd_gradient, fd_hessian, fd_hessian_from_gradient, GRADIENT_STEP, HESSIAN_STEP};
pub use eigen::{
    clamp_spectrum, is_well_conditioned_pd, relative_eigenvalues, symmetric_eigen,
    symmetric_eigenvalues, SymmetricEigen,
};
pub use matrix::{cholesky, distance, dot, norm, CholeskyFactor, Matrix, SpdMatrix, SYMMETRY_TOL};
