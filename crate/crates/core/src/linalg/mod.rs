//! Dense linear algebra kernel.

pub mod constraint;
pub mod eigen;
pub mod io;
pub mod kron;
pub mod matrix;
pub mod svd;

pub use constraint::{project_constraint, ConstraintSpec};
pub use eigen::{symmetric_eigen, symmetric_eigenvalues, SymmetricEigen};
pub use kron::{commutation_matrix, kron};
pub use matrix::{dot, frobenius_norm, DenseMatrix};
pub use svd::{numerical_rank, rank_r_project, singular_values, svd_full, SvdResult};
