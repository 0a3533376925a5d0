use alloc::vec;
use alloc::vec::Vec;

use super::{StepDiagnostics, StepError, StepResult};

/// Adadelta baseline: running averages of squared gradients and squared
/// updates, `Δ = -sqrt(E[Δ²] + ε) / sqrt(E[g²] + ε) g`, applied as `w + γ Δ`.
#[derive(Debug, Clone)]
pub struct AdadeltaState {
    pub rho: f64,
    pub eps: f64,
    sq_grad: Vec<f64>,
    sq_delta: Vec<f64>,
}

impl AdadeltaState {
    pub fn new(dim: usize, rho: f64, eps: f64) -> Result<Self, StepError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(StepError::InvalidParameter { name: "rho", value: rho });
        }
        if !(eps > 0.0) {
            return Err(StepError::InvalidParameter { name: "eps", value: eps });
        }
        Ok(AdadeltaState { rho, eps, sq_grad: vec![0.0; dim], sq_delta: vec![0.0; dim] })
    }

    pub fn step(&mut self, w: &[f64], g: &[f64], step_size: f64) -> Result<StepResult, StepError> {
        let d = self.sq_grad.len();
        for len in [w.len(), g.len()] {
            if len != d {
                return Err(StepError::DimensionMismatch { expected: d, got: len });
            }
        }
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(StepError::InvalidStepSize(step_size));
        }
        let (rho, eps) = (self.rho, self.eps);
        let mut w_next = w.to_vec();
        for j in 0..d {
            self.sq_grad[j] = rho * self.sq_grad[j] + (1.0 - rho) * g[j] * g[j];
            let delta =
                -libm::sqrt(self.sq_delta[j] + eps) / libm::sqrt(self.sq_grad[j] + eps) * g[j];
            self.sq_delta[j] = rho * self.sq_delta[j] + (1.0 - rho) * delta * delta;
            w_next[j] += step_size * delta;
        }
        Ok(StepResult { w_next, lambda: step_size, diagnostics: StepDiagnostics::default() })
    }
}
