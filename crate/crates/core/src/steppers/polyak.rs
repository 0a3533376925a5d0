use super::{apply_b_inv, StepContext, StepDiagnostics, StepError, StepResult, DEGENERATE_NORM};
use crate::vector::{dot, step_along, sub};

/// `|loss + m^T (w_next - w) - f_star|`
fn linear_residual(ctx: &StepContext<'_>, w_next: &[f64]) -> f64 {
    (ctx.gap() + dot(ctx.m, &sub(w_next, ctx.w))).abs()
}

fn learning_rate(ctx: &StepContext<'_>) -> Result<f64, StepError> {
    let gamma = ctx.step_size.ok_or(StepError::MissingStepSize)?;
    if gamma > 0.0 && gamma.is_finite() {
        Ok(gamma)
    } else {
        Err(StepError::InvalidStepSize(gamma))
    }
}

fn fixed_rate(w_next: alloc::vec::Vec<f64>, gamma: f64) -> StepResult {
    StepResult { w_next, lambda: gamma, diagnostics: StepDiagnostics::default() }
}

/// `w - γ m`
pub fn sgd_step(ctx: &StepContext<'_>) -> Result<StepResult, StepError> {
    ctx.check()?;
    let gamma = learning_rate(ctx)?;
    Ok(fixed_rate(step_along(ctx.w, gamma, ctx.m), gamma))
}

/// `w - γ B^{-1} m`
pub fn preconditioned_sgd_step(ctx: &StepContext<'_>) -> Result<StepResult, StepError> {
    ctx.check()?;
    let gamma = learning_rate(ctx)?;
    let dir = apply_b_inv(ctx.require_b()?, ctx.m)?;
    Ok(fixed_rate(step_along(ctx.w, gamma, &dir), gamma))
}

/// Stochastic Polyak step: the smallest move in the Euclidean norm that
/// sends the linearized loss to `f_star`.
pub fn sps_step(ctx: &StepContext<'_>) -> Result<StepResult, StepError> {
    ctx.check()?;
    let gap = ctx.gap();
    let norm_sq = dot(ctx.m, ctx.m);
    if gap <= 0.0 || norm_sq == 0.0 {
        return Ok(StepResult::stay(ctx.w, ctx));
    }
    let lambda = gap / norm_sq;
    let w_next = step_along(ctx.w, lambda, ctx.m);
    let residual = linear_residual(ctx, &w_next);
    Ok(StepResult {
        w_next,
        lambda,
        diagnostics: StepDiagnostics { constraint_residual: Some(residual), ..Default::default() },
    })
}

/// Polyak step measured in the `B` norm.
pub fn psps_step(ctx: &StepContext<'_>) -> Result<StepResult, StepError> {
    ctx.check()?;
    let dir = apply_b_inv(ctx.require_b()?, ctx.m)?;
    let gap = ctx.gap();
    if gap <= 0.0 {
        return Ok(StepResult::stay(ctx.w, ctx));
    }
    let norm_sq = dot(ctx.m, &dir);
    if !(norm_sq >= DEGENERATE_NORM) {
        return Err(StepError::DegenerateGradient { gap, norm_sq });
    }
    let lambda = gap / norm_sq;
    let w_next = step_along(ctx.w, lambda, &dir);
    let residual = linear_residual(ctx, &w_next);
    Ok(StepResult {
        w_next,
        lambda,
        diagnostics: StepDiagnostics { constraint_residual: Some(residual), ..Default::default() },
    })
}

/// Smaller root of `λ² - 2λ + υ = 0`, or 1 when there is none.
pub fn sania_lambda(upsilon: f64) -> Result<f64, StepError> {
    if !(upsilon >= 0.0) {
        return Err(StepError::NegativeUpsilon(upsilon));
    }
    if upsilon >= 1.0 {
        return Ok(1.0);
    }
    // 1 - sqrt(1 - υ) without cancellation for small υ
    Ok(upsilon / (1.0 + libm::sqrt(1.0 - upsilon)))
}

/// Polyak step under the quadratic model `loss + m^T Δ + Δ^T B Δ / 2`.
///
/// `constraint_residual` is `|gap + m^T Δ + Δ^T B Δ / 2|`, zero whenever
/// `υ <= 1`.
pub fn sania_qn_step(ctx: &StepContext<'_>) -> Result<StepResult, StepError> {
    ctx.check()?;
    let b = ctx.require_b()?;
    let dir = apply_b_inv(b, ctx.m)?;
    let gap = ctx.gap();
    if gap <= 0.0 {
        return Ok(StepResult::stay(ctx.w, ctx));
    }
    let norm_sq = dot(ctx.m, &dir);
    if !(norm_sq >= DEGENERATE_NORM) {
        return Err(StepError::DegenerateGradient { gap, norm_sq });
    }
    let upsilon = 2.0 * gap / norm_sq;
    let lambda = sania_lambda(upsilon)?;
    let w_next = step_along(ctx.w, lambda, &dir);
    let delta = sub(&w_next, ctx.w);
    let quad: f64 = delta.iter().zip(b).map(|(dj, bj)| dj * dj * bj).sum();
    let residual = (gap + dot(ctx.m, &delta) + 0.5 * quad).abs();
    Ok(StepResult {
        w_next,
        lambda,
        diagnostics: StepDiagnostics { constraint_residual: Some(residual), ..Default::default() },
    })
}
