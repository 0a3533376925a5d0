//! Row-sparse binary-classification datasets.
//!
//! Storage is compressed sparse rows with 0-based feature indices. The
//! LibSVM interchange format ([`libsvm`]) is 1-based on the wire.

mod batches;
pub mod libsvm;
mod scaling;
mod synthetic;

use alloc::string::String;
use alloc::vec::Vec;

pub use batches::BatchSchedule;
pub use libsvm::{parse_libsvm, to_libsvm, LibsvmParser};
pub use scaling::{scale_columns, ScalingVector};
pub use synthetic::{generate_synthetic, generate_synthetic_with_witness};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: {kind}")]
    Parse { line: usize, kind: ParseErrorKind },
    #[error("expected at most two distinct labels, found {found}")]
    TooManyLabels { found: usize },
    #[error("row {row}: feature index {index} out of range for {cols} columns")]
    IndexOutOfRange { row: usize, index: usize, cols: usize },
    #[error("row {row}: feature indices must be strictly increasing")]
    NotAscending { row: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("batch size {batch_size} out of range for {n} samples")]
    BatchSize { batch_size: usize, n: usize },
    #[error("invalid shape {rows}x{cols}")]
    InvalidShape { rows: usize, cols: usize },
    #[error("scaling range must be finite and non-negative, got {0}")]
    InvalidScale(f64),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("malformed label {0:?}")]
    MalformedLabel(String),
    #[error("malformed token {0:?}")]
    MalformedToken(String),
    #[error("feature index {found} does not follow {previous}")]
    NonAscendingIndex { previous: usize, found: usize },
    #[error("duplicate feature index {0}")]
    DuplicateIndex(usize),
}

/// Target label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelEncoding {
    /// `{-1, +1}`, used by logistic regression.
    PlusMinusOne,
    /// `{0, 1}`, used by non-linear least squares.
    ZeroOne,
}

impl LabelEncoding {
    pub fn targets(self) -> (f64, f64) {
        match self {
            LabelEncoding::PlusMinusOne => (-1.0, 1.0),
            LabelEncoding::ZeroOne => (0.0, 1.0),
        }
    }
}

/// Maps raw labels onto `enc`. Two distinct raw values map to the target
/// pair in order; a single distinct value maps by sign (positive to the
/// upper target).
pub fn normalize_labels(raw: &[f64], enc: LabelEncoding) -> Result<Vec<f64>, DatasetError> {
    let mut distinct: Vec<f64> = raw.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let (lo, hi) = enc.targets();
    match distinct.len() {
        0 => Ok(Vec::new()),
        1 => {
            let t = if distinct[0] > 0.0 { hi } else { lo };
            Ok(raw.iter().map(|_| t).collect())
        }
        2 => {
            let small = distinct[0];
            Ok(raw.iter().map(|&y| if y == small { lo } else { hi }).collect())
        }
        found => Err(DatasetError::TooManyLabels { found }),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseDataset {
    cols: usize,
    row_ptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
}

impl SparseDataset {
    pub fn empty(cols: usize) -> Self {
        SparseDataset {
            cols,
            row_ptr: alloc::vec![0],
            indices: Vec::new(),
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Builds a dataset from per-row `(index, value)` lists with 0-based indices.
    pub fn from_rows(
        cols: usize,
        rows: &[Vec<(usize, f64)>],
        labels: &[f64],
    ) -> Result<Self, DatasetError> {
        if rows.len() != labels.len() {
            return Err(DatasetError::LengthMismatch { expected: rows.len(), got: labels.len() });
        }
        let mut ds = Self::empty(cols);
        for (row, &y) in rows.iter().zip(labels) {
            ds.push_row(row.iter().copied(), y)?;
        }
        Ok(ds)
    }

    /// Builds a dataset from a row-major dense `rows x cols` matrix. Every
    /// entry is stored, zeros included.
    pub fn from_dense(
        rows: usize,
        cols: usize,
        data: &[f64],
        labels: &[f64],
    ) -> Result<Self, DatasetError> {
        if data.len() != rows * cols {
            return Err(DatasetError::LengthMismatch { expected: rows * cols, got: data.len() });
        }
        if labels.len() != rows {
            return Err(DatasetError::LengthMismatch { expected: rows, got: labels.len() });
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        let mut indices = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            indices.extend(0..cols);
            row_ptr.push((i + 1) * cols);
        }
        Ok(SparseDataset {
            cols,
            row_ptr,
            indices,
            values: data.to_vec(),
            labels: labels.to_vec(),
        })
    }

    pub fn push_row<I>(&mut self, entries: I, label: f64) -> Result<(), DatasetError>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let row = self.rows();
        let start = self.indices.len();
        let mut prev: Option<usize> = None;
        for (j, v) in entries {
            let fail = if j >= self.cols {
                Some(DatasetError::IndexOutOfRange { row, index: j, cols: self.cols })
            } else if prev.is_some_and(|p| j <= p) {
                Some(DatasetError::NotAscending { row })
            } else {
                None
            };
            if let Some(err) = fail {
                self.indices.truncate(start);
                self.values.truncate(start);
                return Err(err);
            }
            prev = Some(j);
            self.indices.push(j);
            self.values.push(v);
        }
        self.row_ptr.push(self.indices.len());
        self.labels.push(label);
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// Indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    #[inline]
    pub fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&j, v)| v * w[j]).sum()
    }

    /// `out += alpha * x_i`
    #[inline]
    pub fn add_row_to(&self, i: usize, alpha: f64, out: &mut [f64]) {
        let (idx, val) = self.row(i);
        for (&j, v) in idx.iter().zip(val) {
            out[j] += alpha * v;
        }
    }

    /// Row `i` as a dense vector.
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.cols];
        self.add_row_to(i, 1.0, &mut out);
        out
    }

    /// Same data with the column count raised to `cols`.
    pub fn widen(mut self, cols: usize) -> Self {
        self.cols = self.cols.max(cols);
        self
    }

    /// Replaces the labels, for example after renormalizing them.
    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self, DatasetError> {
        if labels.len() != self.rows() {
            return Err(DatasetError::LengthMismatch { expected: self.rows(), got: labels.len() });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn relabel(self, enc: LabelEncoding) -> Result<Self, DatasetError> {
        let labels = normalize_labels(&self.labels, enc)?;
        self.with_labels(labels)
    }

    /// Multiplies every stored entry of column `j` by `factors[j]`.
    pub fn scale_by(&self, factors: &[f64]) -> Result<Self, DatasetError> {
        if factors.len() != self.cols {
            return Err(DatasetError::LengthMismatch { expected: self.cols, got: factors.len() });
        }
        let mut out = self.clone();
        for (v, &j) in out.values.iter_mut().zip(&self.indices) {
            *v *= factors[j];
        }
        Ok(out)
    }

    /// Row-major dense copy of the design matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.rows() * self.cols];
        for i in 0..self.rows() {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                out[i * self.cols + j] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn push_row_rejects_unsorted_and_out_of_range() {
        let mut ds = SparseDataset::empty(3);
        assert_eq!(
            ds.push_row([(1, 1.0), (1, 2.0)], 1.0),
            Err(DatasetError::NotAscending { row: 0 })
        );
        assert_eq!(
            ds.push_row([(3, 1.0)], 1.0),
            Err(DatasetError::IndexOutOfRange { row: 0, index: 3, cols: 3 })
        );
        assert_eq!(ds.rows(), 0);
        assert_eq!(ds.nnz(), 0);
        ds.push_row([(0, 1.0), (2, 4.0)], -1.0).unwrap();
        assert_eq!(ds.row(0), (&[0usize, 2][..], &[1.0, 4.0][..]));
    }

    #[test]
    fn label_normalization() {
        let raw = [2.0, 1.0, 2.0];
        assert_eq!(normalize_labels(&raw, LabelEncoding::PlusMinusOne).unwrap(), vec![1.0, -1.0, 1.0]);
        assert_eq!(normalize_labels(&raw, LabelEncoding::ZeroOne).unwrap(), vec![1.0, 0.0, 1.0]);
        assert_eq!(normalize_labels(&[-1.0], LabelEncoding::ZeroOne).unwrap(), vec![0.0]);
        assert_eq!(
            normalize_labels(&[1.0, 2.0, 3.0], LabelEncoding::ZeroOne),
            Err(DatasetError::TooManyLabels { found: 3 })
        );
    }

    #[test]
    fn dense_round_trip() {
        let data = [1.0, 0.0, 2.0, 3.0, 4.0, 0.0];
        let ds = SparseDataset::from_dense(2, 3, &data, &[1.0, -1.0]).unwrap();
        assert_eq!(ds.nnz(), 6);
        assert_eq!(ds.to_dense(), data.to_vec());
        assert_eq!(ds.row_dot(1, &[1.0, 1.0, 1.0]), 7.0);
    }
}
