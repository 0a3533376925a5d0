//! Update rules. Each stepper is a pure map from a [`StepContext`] to the
//! next iterate; preconditioner state is owned by the caller.
//!
//! Polyak-type steppers never take a step when `loss <= f_star`: λ is
//! clamped to 0 and, if the loss is strictly below `f_star`, the event is
//! flagged in [`StepDiagnostics::below_f_star`].
//!
//! Diagonal `B` entries equal to zero are treated by pseudo-inverse: they
//! are accepted when the matching entry of `m` is zero too and contribute
//! nothing. This lets ε = 0 runs start from a zero accumulator.

mod adadelta;
mod newton;
mod pcg;
mod polyak;

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::linsolve::LinsolveError;

pub use adadelta::AdadeltaState;
pub use newton::{cubic_polyak_step, grad_reg_newton_step, sania_newton_step, CubicOptions};
pub use pcg::{rank1_pseudoinverse_apply, sania_pcg_convex_step, sania_pcg_nonconvex_step, PcgOptions};
pub use polyak::{
    preconditioned_sgd_step, psps_step, sania_lambda, sania_qn_step, sgd_step, sps_step,
};

/// Guard below which `||m||^2_{B^-1}` counts as zero.
pub const DEGENERATE_NORM: f64 = 1e-30;

/// Curvature access for second-order steppers.
#[derive(Clone, Copy)]
pub enum Curvature<'a> {
    Dense(&'a DMatrix<f64>),
    /// `apply(h, out)` writes `H h` into `out`.
    Operator { apply: &'a dyn Fn(&[f64], &mut [f64]), dim: usize },
}

impl Curvature<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Curvature::Dense(h) => h.nrows(),
            Curvature::Operator { dim, .. } => *dim,
        }
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Curvature::Dense(h) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..v.len()).map(|j| h[(i, j)] * v[j]).sum();
                }
            }
            Curvature::Operator { apply, .. } => apply(v, out),
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }
}

impl core::fmt::Debug for Curvature<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Curvature::Dense(h) => write!(f, "Dense({}x{})", h.nrows(), h.ncols()),
            Curvature::Operator { dim, .. } => write!(f, "Operator({dim})"),
        }
    }
}

/// Inputs of one iteration.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub w: &'a [f64],
    /// Sampled loss at `w`.
    pub loss: f64,
    /// Known optimum of the sampled loss.
    pub f_star: f64,
    /// Gradient or momentum direction.
    pub m: &'a [f64],
    /// Diagonal of the norm matrix `B`.
    pub b: Option<&'a [f64]>,
    /// Learning rate, baselines only.
    pub step_size: Option<f64>,
    pub curvature: Option<Curvature<'a>>,
}

impl<'a> StepContext<'a> {
    pub fn new(w: &'a [f64], loss: f64, f_star: f64, m: &'a [f64]) -> Self {
        StepContext { w, loss, f_star, m, b: None, step_size: None, curvature: None }
    }

    pub fn with_b(mut self, b: &'a [f64]) -> Self {
        self.b = Some(b);
        self
    }

    pub fn with_step_size(mut self, step_size: f64) -> Self {
        self.step_size = Some(step_size);
        self
    }

    pub fn with_curvature(mut self, curvature: Curvature<'a>) -> Self {
        self.curvature = Some(curvature);
        self
    }

    pub fn gap(&self) -> f64 {
        self.loss - self.f_star
    }

    fn check(&self) -> Result<(), StepError> {
        let d = self.w.len();
        let mismatch = |got| StepError::DimensionMismatch { expected: d, got };
        if self.m.len() != d {
            return Err(mismatch(self.m.len()));
        }
        if let Some(b) = self.b {
            if b.len() != d {
                return Err(mismatch(b.len()));
            }
        }
        if let Some(c) = self.curvature {
            if c.dim() != d {
                return Err(mismatch(c.dim()));
            }
        }
        Ok(())
    }

    fn require_b(&self) -> Result<&'a [f64], StepError> {
        self.b.ok_or(StepError::MissingPreconditioner)
    }

    fn require_curvature(&self) -> Result<Curvature<'a>, StepError> {
        self.curvature.ok_or(StepError::MissingCurvature)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Residual of the constraint the step is built to satisfy.
    pub constraint_residual: Option<f64>,
    pub cg_iterations: usize,
    pub kappa: Option<f64>,
    pub negative_curvature: bool,
    /// The sampled loss was strictly below `f_star`.
    pub below_f_star: bool,
    /// No step was taken because the chosen direction was not a descent one.
    pub skipped: bool,
    /// The κ search had to floor the identity shift.
    pub shift_floored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub w_next: Vec<f64>,
    /// Effective multiplier of the step direction.
    pub lambda: f64,
    pub diagnostics: StepDiagnostics,
}

impl StepResult {
    fn stay(w: &[f64], ctx: &StepContext<'_>) -> Self {
        StepResult {
            w_next: w.to_vec(),
            lambda: 0.0,
            diagnostics: StepDiagnostics { below_f_star: ctx.loss < ctx.f_star, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StepError {
    #[error("step size required")]
    MissingStepSize,
    #[error("step size must be positive and finite, got {0}")]
    InvalidStepSize(f64),
    #[error("preconditioner diagonal required")]
    MissingPreconditioner,
    #[error("curvature oracle required")]
    MissingCurvature,
    #[error("non-positive preconditioner entry {value} at index {index}")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate gradient: gap {gap} with squared norm {norm_sq}")]
    DegenerateGradient { gap: f64, norm_sq: f64 },
    #[error("upsilon must be non-negative, got {0}")]
    NegativeUpsilon(f64),
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("CG hit its iteration cap ({iterations})")]
    CgMaxIter { iterations: usize },
    #[error("negative curvature at CG iteration {iteration}")]
    NegativeCurvature { iteration: usize },
    #[error("linear solve failed: {0}")]
    Linsolve(#[from] LinsolveError),
}

/// `B^+ m` for a diagonal `B`, with the zero-entry convention of this module.
pub fn apply_b_inv(b: &[f64], m: &[f64]) -> Result<Vec<f64>, StepError> {
    b.iter()
        .zip(m)
        .enumerate()
        .map(|(index, (&bj, &mj))| {
            if bj > 0.0 {
                Ok(mj / bj)
            } else if bj == 0.0 && mj == 0.0 {
                Ok(0.0)
            } else {
                Err(StepError::NonPositiveDiagonal { index, value: bj })
            }
        })
        .collect()
}
