//! Bisection for the multiplier of the quadratic Polyak constraint.
//!
//! With `x(k) = [(1-k) H + k I]^{-1} g` the step `-(1-k) x(k)` meets the
//! constraint `gap + g^T s + s^T H s / 2 = 0` exactly when
//!
//! `C(k) = gap - (1-k)/2 g^T x(k) - k(1-k)/2 ||x(k)||^2 = 0`.
//!
//! `C(1) = gap >= 0` and `C(0) = gap - ||g||^2_{H^-1} / 2`, so whenever
//! the Newton step overshoots the constraint there is a root in `[0, 1]`.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::dense::{cholesky_solve, divide_shifted};
use super::pcg::{pcg, PcgStatus};
use super::{LinsolveError, SymEigen};
use crate::vector::dot;

/// Smallest identity shift used when evaluating `C` near `k = 0`.
pub const SHIFT_FLOOR: f64 = 1e-14;

/// A symmetric `H` that can solve `(a H + b I) x = rhs`.
pub trait ShiftedSystem {
    fn dim(&self) -> usize;

    fn solve(&self, a: f64, b: f64, rhs: &[f64]) -> Result<Vec<f64>, LinsolveError>;

    /// `(rhs^T x, ||x||^2)` for `x = (a H + b I)^{-1} rhs`.
    fn quadratic_terms(&self, a: f64, b: f64, rhs: &[f64]) -> Result<(f64, f64), LinsolveError> {
        let x = self.solve(a, b, rhs)?;
        Ok((dot(rhs, &x), dot(&x, &x)))
    }
}

/// Fresh Cholesky factorization per solve.
pub struct DenseShifted<'a>(pub &'a DMatrix<f64>);

impl ShiftedSystem for DenseShifted<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn solve(&self, a: f64, b: f64, rhs: &[f64]) -> Result<Vec<f64>, LinsolveError> {
        cholesky_solve(self.0, a, b, rhs)
    }
}

/// One eigendecomposition up front; every shifted solve is then diagonal.
pub struct EigenShifted(pub SymEigen);

impl ShiftedSystem for EigenShifted {
    fn dim(&self) -> usize {
        self.0.values.len()
    }

    fn solve(&self, a: f64, b: f64, rhs: &[f64]) -> Result<Vec<f64>, LinsolveError> {
        super::solve_shifted_diag(&self.0, rhs, a, b)
    }

    fn quadratic_terms(&self, a: f64, b: f64, rhs: &[f64]) -> Result<(f64, f64), LinsolveError> {
        // U is orthogonal: both terms live in the rotated basis
        let rotated = self.0.rotate(rhs);
        let mut t = rotated.clone();
        divide_shifted(&self.0.values, &mut t, a, b)?;
        Ok((dot(&rotated, &t), dot(&t, &t)))
    }
}

/// Matrix-free `H` solved by unpreconditioned CG on the shifted operator.
pub struct OperatorShifted<F> {
    pub apply: F,
    pub dim: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl<F: Fn(&[f64], &mut [f64])> ShiftedSystem for OperatorShifted<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn solve(&self, a: f64, b: f64, rhs: &[f64]) -> Result<Vec<f64>, LinsolveError> {
        let ones = alloc::vec![1.0; self.dim];
        let op = |v: &[f64], out: &mut [f64]| {
            (self.apply)(v, out);
            for (o, vi) in out.iter_mut().zip(v) {
                *o = a * *o + b * vi;
            }
        };
        let out = pcg(op, rhs, &ones, self.tol, self.max_iter);
        match out.status {
            PcgStatus::Converged => Ok(out.x),
            PcgStatus::NegativeCurvature { .. } => {
                Err(LinsolveError::NotPositiveDefinite { pivot: out.iterations, value: 0.0 })
            }
            PcgStatus::MaxIter => Err(LinsolveError::NotConverged { iterations: out.iterations }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicSearchOptions {
    /// Stop once `|C(k)|` falls below this.
    pub tol: f64,
    /// Stop once the bracket is narrower than this.
    pub interval_tol: f64,
    pub max_evals: usize,
}

impl Default for CubicSearchOptions {
    fn default() -> Self {
        CubicSearchOptions { tol: 1e-14, interval_tol: f64::EPSILON, max_evals: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSearchResult {
    pub kappa: f64,
    /// `|C(kappa)|`
    pub residual: f64,
    pub evaluations: usize,
    /// The identity shift was raised to [`SHIFT_FLOOR`] during the search.
    pub shift_floored: bool,
}

/// `C(k)` and whether the shift floor was applied.
pub fn cubic_constraint<S: ShiftedSystem + ?Sized>(
    system: &S,
    g: &[f64],
    gap: f64,
    kappa: f64,
) -> Result<(f64, bool), LinsolveError> {
    if kappa >= 1.0 {
        return Ok((gap, false));
    }
    let floored = kappa < SHIFT_FLOOR;
    let b = kappa.max(SHIFT_FLOOR);
    let (gx, xx) = system.quadratic_terms(1.0 - kappa, b, g)?;
    let c = gap - 0.5 * (1.0 - kappa) * gx - 0.5 * kappa * (1.0 - kappa) * xx;
    if c.is_finite() { Ok((c, floored)) } else { Err(LinsolveError::NonFinite) }
}

/// Bisection for `C(k) = 0` on `[0, 1]`.
///
/// Requires `0 <= gap <= ||g||^2_{H^-1} / 2`; callers take the plain Newton
/// step otherwise.
pub fn cubic_kappa_search<S: ShiftedSystem + ?Sized>(
    g: &[f64],
    system: &S,
    gap: f64,
    opts: CubicSearchOptions,
) -> Result<CubicSearchResult, LinsolveError> {
    if g.len() != system.dim() {
        return Err(LinsolveError::DimensionMismatch { expected: system.dim(), got: g.len() });
    }
    if !gap.is_finite() {
        return Err(LinsolveError::NonFinite);
    }
    let c1 = gap;
    let (c0, mut floored) = cubic_constraint(system, g, gap, 0.0)?;
    let mut evaluations = 1;
    if c0.abs() < opts.tol {
        return Ok(CubicSearchResult { kappa: 0.0, residual: c0.abs(), evaluations, shift_floored: floored });
    }
    if c1.abs() < opts.tol {
        return Ok(CubicSearchResult { kappa: 1.0, residual: c1.abs(), evaluations, shift_floored: floored });
    }
    if !(c0 < 0.0 && c1 > 0.0) {
        return Err(LinsolveError::NoSignChange { c0, c1 });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut best_kappa, mut best_c) = if -c0 < c1 { (lo, c0) } else { (hi, c1) };
    while evaluations < opts.max_evals && hi - lo > opts.interval_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (c, f) = cubic_constraint(system, g, gap, mid)?;
        floored |= f;
        evaluations += 1;
        if c.abs() < best_c.abs() {
            best_kappa = mid;
            best_c = c;
        }
        if c.abs() < opts.tol {
            break;
        }
        if c < 0.0 { lo = mid } else { hi = mid }
    }
    Ok(CubicSearchResult {
        kappa: best_kappa,
        residual: best_c.abs(),
        evaluations,
        shift_floored: floored,
    })
}
