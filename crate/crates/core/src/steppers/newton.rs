use alloc::boxed::Box;

use super::pcg::PcgOptions;
use super::polyak::sania_lambda;
use super::{Curvature, StepContext, StepDiagnostics, StepError, StepResult, DEGENERATE_NORM};
use crate::linsolve::{
    cholesky_solve, cubic_kappa_search, eig_sym, CubicSearchOptions, DenseShifted, EigenShifted,
    LinsolveError, OperatorShifted, ShiftedSystem,
};
use crate::vector::{dot, norm2, scaled, step_along, sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicOptions {
    pub search: CubicSearchOptions,
    /// With a dense Hessian, diagonalize once and make every κ evaluation
    /// a diagonal solve; otherwise factor afresh per evaluation.
    pub eigen: bool,
    /// Inner CG solves for operator Hessians.
    pub cg: PcgOptions,
}

impl Default for CubicOptions {
    fn default() -> Self {
        CubicOptions { search: CubicSearchOptions::default(), eigen: true, cg: PcgOptions::default() }
    }
}

fn shifted_system<'a>(
    curvature: Curvature<'a>,
    eigen: bool,
    cg: &PcgOptions,
) -> Result<Box<dyn ShiftedSystem + 'a>, StepError> {
    Ok(match curvature {
        Curvature::Dense(h) if eigen => {
            let eig = eig_sym(h)?;
            if let Some((pivot, &value)) = eig.values.iter().enumerate().find(|(_, &s)| !(s > 0.0)) {
                return Err(LinsolveError::NotPositiveDefinite { pivot, value }.into());
            }
            Box::new(EigenShifted(eig))
        }
        Curvature::Dense(h) => Box::new(DenseShifted(h)),
        Curvature::Operator { apply, dim } => Box::new(OperatorShifted {
            apply: move |v: &[f64], out: &mut [f64]| apply(v, out),
            dim,
            tol: cg.tol,
            max_iter: cg.cap(dim),
        }),
    })
}

/// `(a H + b I)^{-1} g` for the plain (non-κ) Newton-type solves.
fn shifted_solve(
    curvature: Curvature<'_>,
    b: f64,
    g: &[f64],
    cg: &PcgOptions,
) -> Result<alloc::vec::Vec<f64>, StepError> {
    match curvature {
        Curvature::Dense(h) => Ok(cholesky_solve(h, 1.0, b, g)?),
        op => Ok(shifted_system(op, false, cg)?.solve(1.0, b, g)?),
    }
}

/// `w - (H + sqrt(L2 ||g|| / 3) I)^{-1} g`
pub fn grad_reg_newton_step(ctx: &StepContext<'_>, l2: f64) -> Result<StepResult, StepError> {
    ctx.check()?;
    if !(l2 > 0.0 && l2.is_finite()) {
        return Err(StepError::InvalidParameter { name: "l2", value: l2 });
    }
    let curvature = ctx.require_curvature()?;
    let g = ctx.m;
    let gnorm = norm2(g);
    if gnorm == 0.0 {
        return Ok(StepResult { w_next: ctx.w.to_vec(), lambda: 1.0, diagnostics: StepDiagnostics::default() });
    }
    let shift = libm::sqrt(l2 * gnorm / 3.0);
    let x = shifted_solve(curvature, shift, g, &PcgOptions::default())?;
    Ok(StepResult { w_next: sub(ctx.w, &x), lambda: 1.0, diagnostics: StepDiagnostics::default() })
}

/// `|gap + g^T Δ + Δ^T H Δ / 2|` at `Δ = w_next - w`.
fn quadratic_residual(ctx: &StepContext<'_>, curvature: Curvature<'_>, w_next: &[f64]) -> f64 {
    let delta = sub(w_next, ctx.w);
    let h_delta = curvature.apply(&delta);
    (ctx.gap() + dot(ctx.m, &delta) + 0.5 * dot(&delta, &h_delta)).abs()
}

/// Newton direction with the SANIA step-size: `υ = 2 gap / ||g||^2_{H^-1}`.
pub fn sania_newton_step(ctx: &StepContext<'_>) -> Result<StepResult, StepError> {
    ctx.check()?;
    let curvature = ctx.require_curvature()?;
    let gap = ctx.gap();
    if gap <= 0.0 {
        return Ok(StepResult::stay(ctx.w, ctx));
    }
    let s = shifted_solve(curvature, 0.0, ctx.m, &PcgOptions::default())?;
    let norm_sq = dot(ctx.m, &s);
    if !(norm_sq >= DEGENERATE_NORM) {
        return Err(StepError::DegenerateGradient { gap, norm_sq });
    }
    let lambda = sania_lambda(2.0 * gap / norm_sq)?;
    let w_next = step_along(ctx.w, lambda, &s);
    let residual = quadratic_residual(ctx, curvature, &w_next);
    Ok(StepResult {
        w_next,
        lambda,
        diagnostics: StepDiagnostics { constraint_residual: Some(residual), ..Default::default() },
    })
}

/// Newton step with the quadratic Polyak constraint.
///
/// Takes the pure Newton step when `gap > ||g||^2_{H^-1} / 2`; otherwise
/// bisects for κ and steps `-(1-κ) [(1-κ) H + κ I]^{-1} g`. `lambda`
/// reports `1 - κ` and `constraint_residual` reports `|C(κ)|`.
pub fn cubic_polyak_step(ctx: &StepContext<'_>, opts: &CubicOptions) -> Result<StepResult, StepError> {
    ctx.check()?;
    let curvature = ctx.require_curvature()?;
    let gap = ctx.gap();
    if gap <= 0.0 {
        let mut out = StepResult::stay(ctx.w, ctx);
        out.diagnostics.kappa = Some(1.0);
        return Ok(out);
    }
    let g = ctx.m;
    let system = shifted_system(curvature, opts.eigen, &opts.cg)?;
    let newton = system.solve(1.0, 0.0, g)?;
    let half_decrement = 0.5 * dot(g, &newton);
    if gap > half_decrement {
        return Ok(StepResult {
            w_next: sub(ctx.w, &newton),
            lambda: 1.0,
            diagnostics: StepDiagnostics { kappa: Some(0.0), ..Default::default() },
        });
    }
    let search = cubic_kappa_search(g, system.as_ref(), gap, opts.search)?;
    let kappa = search.kappa;
    let x = if kappa == 0.0 {
        newton
    } else if kappa >= 1.0 {
        alloc::vec![0.0; g.len()]
    } else {
        system.solve(1.0 - kappa, kappa, g)?
    };
    Ok(StepResult {
        w_next: sub(ctx.w, &scaled(1.0 - kappa, &x)),
        lambda: 1.0 - kappa,
        diagnostics: StepDiagnostics {
            constraint_residual: Some(search.residual),
            kappa: Some(kappa),
            shift_floored: search.shift_floored,
            ..Default::default()
        },
    })
}
