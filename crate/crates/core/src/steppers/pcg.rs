use alloc::vec::Vec;

use super::polyak::sania_lambda;
use super::{StepContext, StepDiagnostics, StepError, StepResult, DEGENERATE_NORM};
use crate::linsolve::{pcg, PcgOutcome, PcgStatus};
use crate::vector::{dot, step_along};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOptions {
    /// Relative tolerance on `||r||_{M^-1}`.
    pub tol: f64,
    /// Iteration cap; `None` means the dimension.
    pub max_iter: Option<usize>,
}

impl Default for PcgOptions {
    fn default() -> Self {
        PcgOptions { tol: 1e-10, max_iter: None }
    }
}

impl PcgOptions {
    pub fn cap(&self, dim: usize) -> usize {
        self.max_iter.unwrap_or(dim).max(1)
    }
}

/// `(s s^T / s^T y) g`: the pseudo-inverse of the rank-1 SR-1 matrix
/// built from `s` and `y` applied to `g`.
pub fn rank1_pseudoinverse_apply(s: &[f64], y: &[f64], g: &[f64]) -> Vec<f64> {
    let c = dot(s, g) / dot(s, y);
    s.iter().map(|si| c * si).collect()
}

fn run_pcg(ctx: &StepContext<'_>, m_inv: &[f64], opts: &PcgOptions) -> Result<PcgOutcome, StepError> {
    ctx.check()?;
    let curvature = ctx.require_curvature()?;
    let d = ctx.w.len();
    if m_inv.len() != d {
        return Err(StepError::DimensionMismatch { expected: d, got: m_inv.len() });
    }
    if let Some((index, &value)) = m_inv.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(StepError::NonPositiveDiagonal { index, value });
    }
    Ok(pcg(|v, out| curvature.apply_into(v, out), ctx.m, m_inv, opts.tol, opts.cap(d)))
}

/// SANIA step along `s = x`, `υ = 2 gap / g^T s`.
fn sania_along(ctx: &StepContext<'_>, s: &[f64], iterations: usize) -> Result<StepResult, StepError> {
    let gap = ctx.gap();
    let gs = dot(ctx.m, s);
    if !(gs >= DEGENERATE_NORM) {
        return Err(StepError::DegenerateGradient { gap, norm_sq: gs });
    }
    let lambda = sania_lambda(2.0 * gap / gs)?;
    Ok(StepResult {
        w_next: step_along(ctx.w, lambda, s),
        lambda,
        diagnostics: StepDiagnostics { cg_iterations: iterations, ..Default::default() },
    })
}

/// Newton-CG with the SANIA step-size, for convex losses.
///
/// `m_inv` is the inverse of the diagonal CG preconditioner.
pub fn sania_pcg_convex_step(
    ctx: &StepContext<'_>,
    m_inv: &[f64],
    opts: &PcgOptions,
) -> Result<StepResult, StepError> {
    ctx.check()?;
    if ctx.gap() <= 0.0 {
        ctx.require_curvature()?;
        return Ok(StepResult::stay(ctx.w, ctx));
    }
    let out = run_pcg(ctx, m_inv, opts)?;
    match out.status {
        PcgStatus::Converged => sania_along(ctx, &out.x, out.iterations),
        PcgStatus::MaxIter => Err(StepError::CgMaxIter { iterations: out.iterations }),
        PcgStatus::NegativeCurvature { .. } => {
            Err(StepError::NegativeCurvature { iteration: out.iterations })
        }
    }
}

/// Newton-CG for non-convex losses.
///
/// On negative curvature at iteration `j` the direction is
/// `s = γ x_j + (1-γ) sign(g^T p_j) p_j` with step `min(gap / g^T s, η)`;
/// a non-descent `s` skips the step. Otherwise the last CG iterate is used
/// exactly as in the convex stepper, since the rank-1 SR-1 matrix built
/// from `s` and `g` has `B^+ g = s`.
pub fn sania_pcg_nonconvex_step(
    ctx: &StepContext<'_>,
    m_inv: &[f64],
    opts: &PcgOptions,
    gamma_mix: f64,
    eta_cap: f64,
) -> Result<StepResult, StepError> {
    if !(0.0..=1.0).contains(&gamma_mix) {
        return Err(StepError::InvalidParameter { name: "gamma_mix", value: gamma_mix });
    }
    if !(eta_cap > 0.0) {
        return Err(StepError::InvalidParameter { name: "eta_cap", value: eta_cap });
    }
    ctx.check()?;
    if ctx.gap() <= 0.0 {
        ctx.require_curvature()?;
        return Ok(StepResult::stay(ctx.w, ctx));
    }
    let out = run_pcg(ctx, m_inv, opts)?;
    let (direction, iterate) = match out.status {
        PcgStatus::Converged | PcgStatus::MaxIter => {
            let mut res = sania_along(ctx, &out.x, out.iterations).or_else(|e| match e {
                StepError::DegenerateGradient { .. } => Ok(skip(ctx, out.iterations, false)),
                e => Err(e),
            })?;
            res.diagnostics.cg_iterations = out.iterations;
            return Ok(res);
        }
        PcgStatus::NegativeCurvature { direction, iterate } => (direction, iterate),
    };
    let sign = match dot(ctx.m, &direction) {
        x if x > 0.0 => 1.0,
        x if x < 0.0 => -1.0,
        _ => 0.0,
    };
    let s: Vec<f64> = iterate
        .iter()
        .zip(&direction)
        .map(|(x, p)| gamma_mix * x + (1.0 - gamma_mix) * sign * p)
        .collect();
    let gs = dot(ctx.m, &s);
    if !(gs > 0.0) {
        return Ok(skip(ctx, out.iterations, true));
    }
    let lambda = (ctx.gap() / gs).min(eta_cap);
    Ok(StepResult {
        w_next: step_along(ctx.w, lambda, &s),
        lambda,
        diagnostics: StepDiagnostics {
            cg_iterations: out.iterations,
            negative_curvature: true,
            ..Default::default()
        },
    })
}

fn skip(ctx: &StepContext<'_>, iterations: usize, negative_curvature: bool) -> StepResult {
    let mut out = StepResult::stay(ctx.w, ctx);
    out.diagnostics.skipped = true;
    out.diagnostics.cg_iterations = iterations;
    out.diagnostics.negative_curvature = negative_curvature;
    out
}
