use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, SparseDataset};

/// Per-column factors `v_j = exp(a_j)`, `a_j ~ Uniform[-k, k]`, drawn in
/// column order from one ChaCha8 stream seeded by `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingVector {
    pub values: Vec<f64>,
    pub k: f64,
    pub seed: u64,
}

impl ScalingVector {
    pub fn draw(cols: usize, k: f64, seed: u64) -> Result<Self, DatasetError> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(DatasetError::InvalidScale(k));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..cols)
            .map(|_| {
                let u: f64 = rng.random();
                // a = k (2u - 1), exactly zero when k = 0
                libm::exp(k * (2.0 * u - 1.0))
            })
            .collect();
        Ok(ScalingVector { values, k, seed })
    }

    pub fn reciprocal(&self) -> Vec<f64> {
        self.values.iter().map(|v| 1.0 / v).collect()
    }

    pub fn apply(&self, ds: &SparseDataset) -> Result<SparseDataset, DatasetError> {
        ds.scale_by(&self.values)
    }
}

/// Returns a copy of `ds` with column `j` multiplied by `v_j`.
pub fn scale_columns(
    ds: &SparseDataset,
    k: f64,
    seed: u64,
) -> Result<(SparseDataset, ScalingVector), DatasetError> {
    let v = ScalingVector::draw(ds.cols(), k, seed)?;
    let scaled = v.apply(ds)?;
    Ok((scaled, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::generate_synthetic;

    #[test]
    fn zero_range_is_identity() {
        let ds = generate_synthetic(5, 4, 3).unwrap();
        let (out, v) = scale_columns(&ds, 0.0, 11).unwrap();
        assert!(v.values.iter().all(|&x| x == 1.0));
        assert_eq!(out, ds);
    }

    #[test]
    fn factors_within_range() {
        for k in [0.5, 2.0, 6.0] {
            let v = ScalingVector::draw(500, k, 1).unwrap();
            let (lo, hi) = (libm::exp(-k), libm::exp(k));
            assert!(v.values.iter().all(|&x| lo <= x && x <= hi));
        }
    }

    #[test]
    fn all_ones_columns_become_factors() {
        let ds = SparseDataset::from_dense(3, 2, &[1.0; 6], &[1.0, -1.0, 1.0]).unwrap();
        let (out, v) = scale_columns(&ds, 2.0, 1).unwrap();
        // independent recomputation of the seeded draws
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let expect: Vec<f64> = (0..2)
            .map(|_| libm::exp(-2.0 + 4.0 * rng.random::<f64>()))
            .collect();
        for (a, b) in v.values.iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-15 * b.abs());
        }
        let dense = out.to_dense();
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(dense[i * 2 + j], v.values[j]);
            }
        }
        assert_eq!(ds.to_dense(), [1.0; 6].to_vec());
    }

    #[test]
    fn reciprocal_recovers_original() {
        let ds = generate_synthetic(20, 30, 5).unwrap();
        let (scaled, v) = scale_columns(&ds, 6.0, 9).unwrap();
        let back = scaled.scale_by(&v.reciprocal()).unwrap();
        for (a, b) in back.to_dense().iter().zip(ds.to_dense()) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn negative_range_rejected() {
        assert_eq!(ScalingVector::draw(3, -1.0, 0), Err(DatasetError::InvalidScale(-1.0)));
    }
}
