//! Linear-algebra kernels for the second-order steppers.

mod cubic;
mod dense;
mod pcg;

pub use cubic::{
    cubic_constraint, cubic_kappa_search, CubicSearchOptions, CubicSearchResult, DenseShifted,
    EigenShifted, OperatorShifted, ShiftedSystem, SHIFT_FLOOR,
};
pub use dense::{cholesky_solve, eig_sym, solve_shifted_diag, SymEigen};
pub use pcg::{pcg, PcgOutcome, PcgStatus};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinsolveError {
    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("non-finite input")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shifted diagonal is singular at index {0}")]
    SingularShift(usize),
    #[error("no sign change of C on [0, 1]: C(0) = {c0}, C(1) = {c1}")]
    NoSignChange { c0: f64, c1: f64 },
    #[error("iterative solve did not converge in {iterations} iterations")]
    NotConverged { iterations: usize },
}
