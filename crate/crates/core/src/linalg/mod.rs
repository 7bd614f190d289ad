//! Sparse storage and LU factorizations.

mod csr;
mod lu;

pub use csr::CsrMatrix;
pub use lu::{DenseLu, Factorization, PivotOrder, SingularRows, SparseLu, DENSE_CUTOFF};
