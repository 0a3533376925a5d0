use alloc::vec;
use alloc::vec::Vec;

use crate::vector::{axpy, dot};

#[derive(Debug, Clone, PartialEq)]
pub enum PcgStatus {
    Converged,
    MaxIter,
    /// `p^T A p <= 0` was met; carries that direction and the iterate before it.
    NegativeCurvature { direction: Vec<f64>, iterate: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||r||_{M^-1}` relative to its initial value.
    pub residual: f64,
    pub status: PcgStatus,
}

impl PcgOutcome {
    pub fn converged(&self) -> bool {
        self.status == PcgStatus::Converged
    }
}

/// Preconditioned conjugate gradient for `A x = b` starting from `x = 0`,
/// with a diagonal inverse preconditioner `m_inv`.
///
/// Stops when `||r||_{M^-1} < tol * ||b||_{M^-1}`. A direction with
/// `p^T A p <= 0` ends the run with [`PcgStatus::NegativeCurvature`].
pub fn pcg<A>(apply_a: A, b: &[f64], m_inv: &[f64], tol: f64, max_iter: usize) -> PcgOutcome
where
    A: Fn(&[f64], &mut [f64]),
{
    let d = b.len();
    debug_assert_eq!(m_inv.len(), d);
    let mut x = vec![0.0; d];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(m_inv).map(|(ri, mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let initial = libm::sqrt(rz.max(0.0));
    if initial == 0.0 {
        return PcgOutcome { x, iterations: 0, residual: 0.0, status: PcgStatus::Converged };
    }
    let mut ap = vec![0.0; d];
    let mut residual = 1.0;
    for j in 0..max_iter {
        apply_a(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 || !curvature.is_finite() {
            let iterate = x.clone();
            return PcgOutcome {
                x,
                iterations: j,
                residual,
                status: PcgStatus::NegativeCurvature { direction: p, iterate },
            };
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        for ((zi, ri), mi) in z.iter_mut().zip(&r).zip(m_inv) {
            *zi = ri * mi;
        }
        let rz_next = dot(&r, &z);
        residual = libm::sqrt(rz_next.max(0.0)) / initial;
        if residual < tol {
            return PcgOutcome { x, iterations: j + 1, residual, status: PcgStatus::Converged };
        }
        let beta = rz_next / rz;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        rz = rz_next;
    }
    PcgOutcome { x, iterations: max_iter, residual, status: PcgStatus::MaxIter }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_op(diag: &'static [f64]) -> impl Fn(&[f64], &mut [f64]) {
        move |v, out| {
            for ((o, vi), di) in out.iter_mut().zip(v).zip(diag) {
                *o = vi * di;
            }
        }
    }

    #[test]
    fn identity_in_one_iteration() {
        let b = [3.0, -1.0, 2.0];
        let out = pcg(diag_op(&[1.0, 1.0, 1.0]), &b, &[1.0; 3], 1e-10, 3);
        assert_eq!(out.status, PcgStatus::Converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b.to_vec());
    }

    #[test]
    fn diagonal_two_by_two() {
        let out = pcg(diag_op(&[2.0, 4.0]), &[2.0, 4.0], &[1.0; 2], 1e-10, 2);
        assert!(out.converged());
        assert!(out.iterations <= 2);
        for xi in &out.x {
            assert!((xi - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_curvature_witness() {
        let out = pcg(diag_op(&[1.0, -1.0]), &[0.0, 1.0], &[1.0; 2], 1e-10, 2);
        assert_eq!(out.iterations, 0);
        match out.status {
            PcgStatus::NegativeCurvature { direction, iterate } => {
                assert_eq!(direction, vec![0.0, 1.0]);
                assert_eq!(iterate, vec![0.0, 0.0]);
            }
            other => panic!("unexpected status {other:?}"),
        }
    }

    #[test]
    fn zero_rhs() {
        let out = pcg(diag_op(&[1.0, 2.0]), &[0.0, 0.0], &[1.0; 2], 1e-10, 2);
        assert!(out.converged());
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn max_iter_status() {
        let out = pcg(diag_op(&[1.0, 10.0, 100.0]), &[1.0, 1.0, 1.0], &[1.0; 3], 1e-14, 1);
        assert_eq!(out.status, PcgStatus::MaxIter);
    }
}
