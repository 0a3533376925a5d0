use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DatasetError, SparseDataset};

/// Dense standard-normal `n x d` design with labels `sign(X w*)` for a hidden
/// standard-normal `w*`. A zero margin is labelled `+1`.
pub fn generate_synthetic(n: usize, d: usize, seed: u64) -> Result<SparseDataset, DatasetError> {
    generate_synthetic_with_witness(n, d, seed).map(|(ds, _)| ds)
}

/// Like [`generate_synthetic`], also returning the hidden separator `w*`.
pub fn generate_synthetic_with_witness(
    n: usize,
    d: usize,
    seed: u64,
) -> Result<(SparseDataset, Vec<f64>), DatasetError> {
    if n == 0 || d == 0 {
        return Err(DatasetError::InvalidShape { rows: n, cols: d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let w_star: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let labels: Vec<f64> = data
        .chunks_exact(d)
        .map(|row| {
            let t: f64 = row.iter().zip(&w_star).map(|(x, w)| x * w).sum();
            if t < 0.0 { -1.0 } else { 1.0 }
        })
        .collect();
    let ds = SparseDataset::from_dense(n, d, &data, &labels)?;
    Ok((ds, w_star))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_shape() {
        let ds = generate_synthetic(2, 2, 0).unwrap();
        assert_eq!((ds.rows(), ds.cols(), ds.nnz()), (2, 2, 4));
        assert!(ds.labels().iter().all(|&y| y == 1.0 || y == -1.0));
        assert!(ds.to_dense().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn witness_separates() {
        let (ds, w) = generate_synthetic_with_witness(1000, 1000, 0).unwrap();
        for i in 0..ds.rows() {
            let margin = ds.label(i) * ds.row_dot(i, &w);
            assert!(margin > 0.0, "row {i} margin {margin}");
        }
    }

    #[test]
    fn seeded_regeneration_is_bit_identical() {
        let a = generate_synthetic(50, 10, 7).unwrap();
        let b = generate_synthetic(50, 10, 7).unwrap();
        assert_eq!(a, b);
        let bits = |ds: &SparseDataset| ds.to_dense().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(a, generate_synthetic(50, 10, 8).unwrap());
    }

    #[test]
    fn rejects_empty_shape() {
        assert!(generate_synthetic(0, 3, 0).is_err());
        assert!(generate_synthetic(3, 0, 0).is_err());
    }
}
