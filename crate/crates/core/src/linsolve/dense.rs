use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::LinsolveError;

/// Solves `(a H + b I) x = rhs` by Cholesky factorization of the shifted matrix.
pub fn cholesky_solve(
    h: &DMatrix<f64>,
    a: f64,
    b: f64,
    rhs: &[f64],
) -> Result<Vec<f64>, LinsolveError> {
    let d = h.nrows();
    if h.ncols() != d || rhs.len() != d {
        return Err(LinsolveError::DimensionMismatch { expected: d, got: rhs.len() });
    }
    // lower factor, row-major
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a * h[(i, j)] + if i == j { b } else { 0.0 };
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if !s.is_finite() {
                return Err(LinsolveError::NonFinite);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(LinsolveError::NotPositiveDefinite { pivot: i, value: s });
                }
                l[i * d + i] = libm::sqrt(s);
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..d {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * d + k] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in i + 1..d {
            s -= l[k * d + i] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    Ok(y)
}

/// `H = U diag(S) U^T`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub vectors: DMatrix<f64>,
    pub values: Vec<f64>,
}

impl SymEigen {
    /// `U^T g`
    pub fn rotate(&self, g: &[f64]) -> Vec<f64> {
        let g = DVector::from_column_slice(g);
        (self.vectors.transpose() * g).as_slice().to_vec()
    }

    /// `U g~`
    pub fn unrotate(&self, g: &[f64]) -> Vec<f64> {
        let g = DVector::from_column_slice(g);
        (&self.vectors * g).as_slice().to_vec()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let s = DMatrix::from_diagonal(&DVector::from_column_slice(&self.values));
        &self.vectors * s * self.vectors.transpose()
    }
}

/// Symmetric eigendecomposition.
pub fn eig_sym(h: &DMatrix<f64>) -> Result<SymEigen, LinsolveError> {
    if h.nrows() != h.ncols() {
        return Err(LinsolveError::DimensionMismatch { expected: h.nrows(), got: h.ncols() });
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(LinsolveError::NonFinite);
    }
    let eig = h.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(LinsolveError::NonFinite);
    }
    Ok(SymEigen { values: eig.eigenvalues.as_slice().to_vec(), vectors: eig.eigenvectors })
}

/// `U (a S + b I)^{-1} U^T g`
pub fn solve_shifted_diag(
    eig: &SymEigen,
    g: &[f64],
    a: f64,
    b: f64,
) -> Result<Vec<f64>, LinsolveError> {
    let d = eig.values.len();
    if g.len() != d {
        return Err(LinsolveError::DimensionMismatch { expected: d, got: g.len() });
    }
    let mut t = eig.rotate(g);
    divide_shifted(&eig.values, &mut t, a, b)?;
    Ok(eig.unrotate(&t))
}

pub(super) fn divide_shifted(
    values: &[f64],
    t: &mut [f64],
    a: f64,
    b: f64,
) -> Result<(), LinsolveError> {
    for (k, (ti, s)) in t.iter_mut().zip(values).enumerate() {
        let denom = a * s + b;
        if denom == 0.0 {
            return Err(LinsolveError::SingularShift(k));
        }
        *ti /= denom;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(d, d) * 0.5
    }

    #[test]
    fn diagonal_eigen() {
        let h = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 5.0]);
        let e = eig_sym(&h).unwrap();
        let mut vals = e.values.clone();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![3.0, 5.0]);
        for j in 0..2 {
            let col = e.vectors.column(j);
            assert_eq!(col.iter().filter(|v| v.abs() == 1.0).count(), 1);
        }
    }

    #[test]
    fn shifted_solve_reduces_to_plain_solve() {
        let h = random_spd(6, 1);
        let g = [1.0, -2.0, 0.5, 0.0, 3.0, -1.0];
        let e = eig_sym(&h).unwrap();
        let x = solve_shifted_diag(&e, &g, 1.0, 0.0).unwrap();
        let y = cholesky_solve(&h, 1.0, 0.0, &g).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn reconstruction_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(10, 10, |_, _| rng.random_range(-1.0..1.0));
        let h = &a + a.transpose();
        let e = eig_sym(&h).unwrap();
        let err = (e.reconstruct() - &h).amax();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn shifted_agrees_with_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in [1, 5, 20, 50] {
            let h = random_spd(d, d as u64);
            let g: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let e = eig_sym(&h).unwrap();
            for (a, b) in [(1.0, 0.0), (0.3, 0.7), (0.01, 0.99)] {
                let x = solve_shifted_diag(&e, &g, a, b).unwrap();
                let y = cholesky_solve(&h, a, b, &g).unwrap();
                for (p, q) in x.iter().zip(&y) {
                    assert!((p - q).abs() < 1e-10, "d={d} a={a}: {p} vs {q}");
                }
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            cholesky_solve(&h, 1.0, 0.0, &[1.0, 1.0]),
            Err(LinsolveError::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn eig_rejects_nan() {
        let h = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert_eq!(eig_sym(&h).unwrap_err(), LinsolveError::NonFinite);
    }
}
