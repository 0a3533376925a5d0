//! GLM losses with closed-form derivative oracles over minibatches.
//!
//! Each sample loss is `phi(y_i, x_i^T w)`; batch quantities are means over
//! the batch indices. Logistic regression expects labels in `{-1, +1}`,
//! non-linear least squares expects `{0, 1}`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::datasets::SparseDataset;

/// Dense symmetric matrix type returned by the Hessian oracles.
pub type DenseMatrix = DMatrix<f64>;

/// Largest dimension for which [`Objective::hessian_dense`] is allowed by default.
pub const DEFAULT_DENSE_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    /// mean of `log(1 + exp(-y x^T w))`
    LogReg,
    /// mean of `(y - sigmoid(x^T w))^2`
    Nllsq,
    /// logistic regression plus `mu/2 ||w||^2`
    LogRegL2 { mu: f64 },
}

impl ObjectiveKind {
    pub fn is_convex(self) -> bool {
        !matches!(self, ObjectiveKind::Nllsq)
    }

    fn ridge(self) -> f64 {
        match self {
            ObjectiveKind::LogRegL2 { mu } => mu,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObjectiveError {
    #[error("dense Hessian of dimension {dim} exceeds the configured cap {cap}")]
    DenseTooLarge { dim: usize, cap: usize },
}

/// Value and gradient of one batch, optionally with the Hessian diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian_diag: Option<Vec<f64>>,
    pub batch: Vec<usize>,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + libm::log1p(libm::exp(-t.abs()))
}

/// Loss and its first two derivatives with respect to the margin `z`.
#[inline]
fn sample_terms(kind: ObjectiveKind, y: f64, z: f64) -> (f64, f64, f64) {
    match kind {
        ObjectiveKind::LogReg | ObjectiveKind::LogRegL2 { .. } => {
            let t = -y * z;
            let s = sigmoid(t);
            (softplus(t), -y * s, y * y * s * sigmoid(-t))
        }
        ObjectiveKind::Nllsq => {
            let s = sigmoid(z);
            let ds = s * sigmoid(-z);
            let r = y - s;
            let d2s = ds * (1.0 - 2.0 * s);
            (r * r, -2.0 * r * ds, 2.0 * ds * ds - 2.0 * r * d2s)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    data: &'a SparseDataset,
    kind: ObjectiveKind,
    f_hat: f64,
    dense_cap: usize,
}

impl<'a> Objective<'a> {
    pub fn new(data: &'a SparseDataset, kind: ObjectiveKind) -> Self {
        Objective { data, kind, f_hat: 0.0, dense_cap: DEFAULT_DENSE_CAP }
    }

    /// Optimum estimate reported by [`Objective::f_star`] for the regularized loss.
    pub fn with_f_hat(mut self, f_hat: f64) -> Self {
        self.f_hat = f_hat;
        self
    }

    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    pub fn data(&self) -> &'a SparseDataset {
        self.data
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn full_batch(&self) -> Vec<usize> {
        (0..self.data.rows()).collect()
    }

    fn inv_len(batch: &[usize]) -> f64 {
        1.0 / batch.len().max(1) as f64
    }

    fn ridge_value(&self, w: &[f64]) -> f64 {
        let mu = self.kind.ridge();
        if mu == 0.0 { 0.0 } else { 0.5 * mu * crate::vector::dot(w, w) }
    }

    pub fn value(&self, w: &[f64], batch: &[usize]) -> f64 {
        let sum: f64 = batch
            .iter()
            .map(|&i| sample_terms(self.kind, self.data.label(i), self.data.row_dot(i, w)).0)
            .sum();
        sum * Self::inv_len(batch) + self.ridge_value(w)
    }

    pub fn gradient(&self, w: &[f64], batch: &[usize]) -> Vec<f64> {
        self.evaluate(w, batch).gradient
    }

    pub fn evaluate(&self, w: &[f64], batch: &[usize]) -> BatchEval {
        self.evaluate_inner(w, batch, false)
    }

    pub fn evaluate_with_diag(&self, w: &[f64], batch: &[usize]) -> BatchEval {
        self.evaluate_inner(w, batch, true)
    }

    fn evaluate_inner(&self, w: &[f64], batch: &[usize], with_diag: bool) -> BatchEval {
        let scale = Self::inv_len(batch);
        let mut value = 0.0;
        let mut gradient = vec![0.0; self.dim()];
        let mut diag = with_diag.then(|| vec![0.0; self.dim()]);
        for &i in batch {
            let (f, d1, d2) = sample_terms(self.kind, self.data.label(i), self.data.row_dot(i, w));
            value += f;
            self.data.add_row_to(i, d1 * scale, &mut gradient);
            if let Some(diag) = diag.as_mut() {
                let (idx, val) = self.data.row(i);
                for (&j, v) in idx.iter().zip(val) {
                    diag[j] += d2 * scale * v * v;
                }
            }
        }
        let mu = self.kind.ridge();
        if mu != 0.0 {
            crate::vector::axpy(mu, w, &mut gradient);
            if let Some(diag) = diag.as_mut() {
                diag.iter_mut().for_each(|h| *h += mu);
            }
        }
        BatchEval {
            value: value * scale + self.ridge_value(w),
            gradient,
            hessian_diag: diag,
            batch: batch.to_vec(),
        }
    }

    /// Hessian of the batch loss at `w` as a reusable operator.
    pub fn hessian_at(&self, w: &[f64], batch: &[usize]) -> HessianOperator<'a> {
        let scale = Self::inv_len(batch);
        let weights = batch
            .iter()
            .map(|&i| sample_terms(self.kind, self.data.label(i), self.data.row_dot(i, w)).2 * scale)
            .collect();
        HessianOperator {
            data: self.data,
            batch: batch.to_vec(),
            weights,
            ridge: self.kind.ridge(),
        }
    }

    pub fn hvp(&self, w: &[f64], batch: &[usize], h: &[f64]) -> Vec<f64> {
        self.hessian_at(w, batch).apply(h)
    }

    pub fn hessian_diag(&self, w: &[f64], batch: &[usize]) -> Vec<f64> {
        self.evaluate_with_diag(w, batch).hessian_diag.unwrap_or_default()
    }

    pub fn hessian_dense(&self, w: &[f64], batch: &[usize]) -> Result<DMatrix<f64>, ObjectiveError> {
        self.hessian_at(w, batch).to_dense(self.dense_cap)
    }

    /// Per-batch optimum: zero under interpolation, the configured estimate
    /// for the regularized loss.
    pub fn f_star(&self, _batch: &[usize]) -> f64 {
        match self.kind {
            ObjectiveKind::LogRegL2 { .. } => self.f_hat,
            _ => 0.0,
        }
    }

    /// Fraction of rows classified correctly: `x^T w >= 0` predicts the upper label.
    pub fn accuracy(&self, w: &[f64]) -> f64 {
        let n = self.data.rows();
        if n == 0 {
            return 0.0;
        }
        let upper = 1.0;
        let correct = (0..n)
            .filter(|&i| {
                let predicted_upper = self.data.row_dot(i, w) >= 0.0;
                predicted_upper == (self.data.label(i) == upper)
            })
            .count();
        correct as f64 / n as f64
    }
}

/// `H = sum_i c_i x_i x_i^T + ridge I` for a fixed batch.
#[derive(Debug, Clone)]
pub struct HessianOperator<'a> {
    data: &'a SparseDataset,
    batch: Vec<usize>,
    weights: Vec<f64>,
    ridge: f64,
}

impl HessianOperator<'_> {
    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(h, &mut out);
        out
    }

    pub fn apply_into(&self, h: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&i, &c) in self.batch.iter().zip(&self.weights) {
            if c != 0.0 {
                let t = c * self.data.row_dot(i, h);
                self.data.add_row_to(i, t, out);
            }
        }
        if self.ridge != 0.0 {
            crate::vector::axpy(self.ridge, h, out);
        }
    }

    pub fn to_dense(&self, cap: usize) -> Result<DMatrix<f64>, ObjectiveError> {
        let d = self.dim();
        if d > cap {
            return Err(ObjectiveError::DenseTooLarge { dim: d, cap });
        }
        // upper triangle in column-major storage, mirrored afterwards
        let mut m = vec![0.0; d * d];
        for (&i, &c) in self.batch.iter().zip(&self.weights) {
            let (idx, val) = self.data.row(i);
            for (q, (&b, &vb)) in idx.iter().zip(val).enumerate() {
                let col = &mut m[b * d..(b + 1) * d];
                let cb = c * vb;
                for (&a, &va) in idx[..=q].iter().zip(&val[..=q]) {
                    col[a] += cb * va;
                }
            }
        }
        for b in 0..d {
            m[b * d + b] += self.ridge;
            for a in 0..b {
                m[a * d + b] = m[b * d + a];
            }
        }
        Ok(DMatrix::from_vec(d, d, m))
    }
}
