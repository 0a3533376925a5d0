//! Multi-run experiments: scale invariance, learning-rate sweeps and the
//! robustness of the cubic Polyak step to the optimum estimate.

use rayon::prelude::*;
use sania_core::linsolve::{cholesky_solve, eig_sym};
use sania_core::objectives::ObjectiveKind;
use sania_core::steppers::{cubic_polyak_step, grad_reg_newton_step, CubicOptions};
use sania_core::vector::{dot, norm2, norm_inf, sub};
use sania_core::{Curvature, Objective, ScalingVector, SparseDataset, StepContext};
use serde::Serialize;

use crate::config::{ObjectiveName, RunConfig};
use crate::data;
use crate::runner::{prepare, run_detailed, run_on, HarnessError};
use crate::trace::{format_float, TrainTrace};

/// Relative loss gap accepted by [`invariance_report`].
pub const INVARIANCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceEpoch {
    pub epoch: usize,
    pub loss_original: f64,
    pub loss_scaled: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub method: String,
    pub dataset: String,
    pub k: f64,
    pub seed: u64,
    pub epochs: Vec<InvarianceEpoch>,
    pub max_relative_gap: f64,
    /// `max_t ||y_t - V^{-1} x_t||_inf`
    pub max_iterate_error: f64,
    /// `max_t ||y_t - V^{-1} x_t||_inf / (1 + ||x_t||_inf)`
    pub max_iterate_error_normalized: f64,
    pub tolerance: f64,
    pub aborted: bool,
    pub pass: bool,
    #[serde(skip)]
    pub original: Option<TrainTrace>,
    #[serde(skip)]
    pub scaled: Option<TrainTrace>,
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 { 0.0 } else { (a - b).abs() / scale }
}

/// Runs `cfg` on the dataset and on its columns scaled by `V` drawn from
/// `(k, seed)`, with identical batch schedules, and compares per-epoch
/// full-train losses and iterates `y_t` against `V^{-1} x_t`.
pub fn invariance_report(cfg: &RunConfig, k: f64, seed: u64) -> Result<InvarianceReport, HarnessError> {
    let base_cfg = RunConfig { scale_k: 0.0, ..cfg.clone() };
    let (base, _) = prepare(&base_cfg)?;
    let v = ScalingVector::draw(base.cols(), k, seed)?;
    let scaled = v.apply(&base)?;
    invariance_on(cfg, &base, &scaled, &v.values, k, seed)
}

/// [`invariance_report`] on prepared data; `scaled` must be `base` with
/// columns multiplied by `v`.
pub fn invariance_on(
    cfg: &RunConfig,
    base: &SparseDataset,
    scaled: &SparseDataset,
    v: &[f64],
    k: f64,
    seed: u64,
) -> Result<InvarianceReport, HarnessError> {
    let orig_cfg = RunConfig { scale_k: 0.0, ..cfg.clone() };
    let scaled_cfg = RunConfig { scale_k: k, scale_seed: Some(seed), ..cfg.clone() };
    let (a, b) = rayon::join(|| run_detailed(&orig_cfg, base, true), || run_detailed(&scaled_cfg, scaled, true));
    let (a, b) = (a?, b?);
    let epochs: Vec<InvarianceEpoch> = a
        .trace
        .evaluations()
        .zip(b.trace.evaluations())
        .map(|(x, y)| InvarianceEpoch {
            epoch: x.epoch,
            loss_original: x.loss,
            loss_scaled: y.loss,
            relative_gap: relative_gap(x.loss, y.loss),
        })
        .collect();
    let mut max_err = 0.0f64;
    let mut max_norm = 0.0f64;
    for (x, y) in a.iterates.iter().zip(&b.iterates) {
        let mapped: Vec<f64> = x.iter().zip(v).map(|(xi, vi)| xi / vi).collect();
        let err = norm_inf(&sub(y, &mapped));
        max_err = max_err.max(err);
        max_norm = max_norm.max(err / (1.0 + norm_inf(x)));
    }
    let max_relative_gap = epochs.iter().map(|e| e.relative_gap).fold(0.0, f64::max);
    let aborted = a.trace.aborted() || b.trace.aborted();
    let complete = a.iterates.len() == b.iterates.len();
    Ok(InvarianceReport {
        method: cfg.method.to_string(),
        dataset: cfg.dataset.clone(),
        k,
        seed,
        pass: !aborted && complete && max_relative_gap <= INVARIANCE_TOL,
        epochs,
        max_relative_gap,
        max_iterate_error: max_err,
        max_iterate_error_normalized: max_norm,
        tolerance: INVARIANCE_TOL,
        aborted,
        original: Some(a.trace),
        scaled: Some(b.trace),
    })
}

impl InvarianceReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["epoch", "loss_original", "loss_scaled", "relative_gap"]).unwrap();
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                format_float(e.loss_original),
                format_float(e.loss_scaled),
                format_float(e.relative_gap),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub exponent: i32,
    pub step_size: f64,
    pub final_loss: f64,
    pub final_accuracy: f64,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub method: String,
    pub dataset: String,
    pub rows: Vec<SweepRow>,
    /// Highest final accuracy, ties broken by lower loss then smaller γ.
    pub best: Option<SweepRow>,
}

/// One run per `γ = 2^n`; runs execute in parallel and are reported in
/// grid order.
pub fn lr_sweep(cfg: &RunConfig, grid: &[i32]) -> Result<SweepTable, HarnessError> {
    if !cfg.method.takes_step_size() {
        return Err(HarnessError::Config(format!("method `{}` takes no learning rate", cfg.method)));
    }
    if grid.is_empty() {
        return Err(HarnessError::Config("empty learning-rate grid".into()));
    }
    let (data, _) = prepare(cfg)?;
    let rows = grid
        .par_iter()
        .map(|&e| {
            let step_size = 2f64.powi(e);
            let trace = run_on(&RunConfig { step_size: Some(step_size), ..cfg.clone() }, &data)?;
            let last = trace.final_evaluation();
            Ok(SweepRow {
                exponent: e,
                step_size,
                final_loss: last.map_or(f64::NAN, |r| r.loss),
                final_accuracy: last.and_then(|r| r.train_accuracy).unwrap_or(0.0),
                aborted: trace.aborted(),
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let best = rows
        .iter()
        .filter(|r| !r.aborted && r.final_loss.is_finite())
        .min_by(|a, b| {
            b.final_accuracy
                .total_cmp(&a.final_accuracy)
                .then(a.final_loss.total_cmp(&b.final_loss))
                .then(a.step_size.total_cmp(&b.step_size))
        })
        .cloned();
    Ok(SweepTable { method: cfg.method.to_string(), dataset: cfg.dataset.clone(), rows, best })
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "dataset", "exponent", "step_size", "final_loss", "final_accuracy", "aborted", "best"])
            .unwrap();
        for r in &self.rows {
            let best = self.best.as_ref().is_some_and(|b| b.exponent == r.exponent);
            w.write_record([
                self.method.clone(),
                self.dataset.clone(),
                r.exponent.to_string(),
                format_float(r.step_size),
                format_float(r.final_loss),
                format_float(r.final_accuracy),
                r.aborted.to_string(),
                best.to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessConfig {
    pub dataset: String,
    pub data_seed: u64,
    pub mu: f64,
    /// Every coordinate of the starting point.
    pub init: f64,
    /// Optimum estimates for the cubic Polyak runs; `None` means
    /// `{f*, f* - 0.03, 0}` with `f*` computed.
    pub f_hat_grid: Option<Vec<f64>>,
    /// Regularization constants of the classical cubic Newton baseline.
    pub cubic_l2: Vec<f64>,
    /// Constants of the gradient-regularized Newton baseline.
    pub grad_reg_l2: Vec<f64>,
    pub max_iters: usize,
    /// Convergence threshold on `f(w) - f*`.
    pub tolerance: f64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            dataset: "synthetic:1000:100".into(),
            data_seed: 0,
            mu: 1e-4,
            init: 3.0,
            f_hat_grid: None,
            cubic_l2: vec![0.1, 0.0004],
            grad_reg_l2: vec![0.0004],
            max_iters: 1000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub method: &'static str,
    pub parameter: &'static str,
    pub value: f64,
    /// First iteration with `f(w) - f* <= tolerance`.
    pub iterations: Option<usize>,
    pub final_gap: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessTable {
    pub config: RobustnessConfig,
    pub f_star: f64,
    pub rows: Vec<RobustnessRow>,
}

/// Minimizer of a strongly convex objective by damped Newton with
/// backtracking; returns `(w*, f*)`.
pub fn newton_minimize(obj: &Objective<'_>, w0: &[f64], max_iters: usize) -> Result<(Vec<f64>, f64), HarnessError> {
    let full = obj.full_batch();
    let mut w = w0.to_vec();
    let mut f = obj.value(&w, &full);
    for _ in 0..max_iters {
        let g = obj.gradient(&w, &full);
        let h = obj.hessian_dense(&w, &full).map_err(|e| HarnessError::Config(e.to_string()))?;
        let dir = cholesky_solve(&h, 1.0, 0.0, &g).map_err(|e| HarnessError::Config(e.to_string()))?;
        let decrement = dot(&g, &dir);
        if decrement <= 1e-28 {
            break;
        }
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(&dir).map(|(wi, di)| wi - t * di).collect();
            let ft = obj.value(&trial, &full);
            if ft <= f - 0.25 * t * decrement || t < 1e-12 {
                if ft <= f {
                    w = trial;
                    f = ft;
                }
                break;
            }
            t *= 0.5;
        }
        if t < 1e-12 {
            break;
        }
    }
    Ok((w, f))
}

/// Classical cubic-regularized Newton step `argmin g^T h + h^T H h / 2 + M ||h||^3 / 6`
/// for convex `H`: `h = -(H + M r / 2 I)^{-1} g` with `r = ||h||` found by
/// bisection in the eigenbasis.
pub fn cubic_newton_step(
    h: &sania_core::objectives::DenseMatrix,
    g: &[f64],
    m: f64,
) -> Result<Vec<f64>, HarnessError> {
    let eig = eig_sym(h).map_err(|e| HarnessError::Config(e.to_string()))?;
    let gt = eig.rotate(g);
    let norm_at = |r: f64| -> f64 {
        let c = 0.5 * m * r;
        gt.iter().zip(&eig.values).map(|(gi, s)| (gi / (s.max(0.0) + c)).powi(2)).sum::<f64>().sqrt()
    };
    if norm2(g) == 0.0 {
        return Ok(vec![0.0; g.len()]);
    }
    // phi(r) = ||h(r)|| - r is decreasing with phi(0+) > 0
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while norm_at(hi) > hi {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm_at(mid) > mid { lo = mid } else { hi = mid }
    }
    let c = 0.25 * m * (lo + hi);
    let mut t = gt;
    for (ti, s) in t.iter_mut().zip(&eig.values) {
        *ti /= s.max(0.0) + c;
    }
    Ok(eig.unrotate(&t).into_iter().map(|x| -x).collect())
}

type Stepper<'s> = dyn Fn(&[f64], f64, &[f64], &sania_core::objectives::DenseMatrix) -> Result<Vec<f64>, String> + Sync + 's;

fn count_iterations(
    obj: &Objective<'_>,
    init: f64,
    f_star: f64,
    cfg: &RobustnessConfig,
    step: &Stepper<'_>,
) -> (Option<usize>, f64, Option<String>) {
    let full = obj.full_batch();
    let mut w = vec![init; obj.dim()];
    let mut gap = f64::INFINITY;
    for it in 0..=cfg.max_iters {
        let f = obj.value(&w, &full);
        gap = f - f_star;
        if !gap.is_finite() {
            return (None, gap, Some("non-finite loss".into()));
        }
        if gap <= cfg.tolerance {
            return (Some(it), gap, None);
        }
        if it == cfg.max_iters {
            break;
        }
        let g = obj.gradient(&w, &full);
        let h = match obj.hessian_dense(&w, &full) {
            Ok(h) => h,
            Err(e) => return (None, gap, Some(e.to_string())),
        };
        match step(&w, f, &g, &h) {
            Ok(next) => w = next,
            Err(e) => return (None, gap, Some(e)),
        }
    }
    (None, gap, None)
}

/// Iterations to reach `f* + tolerance` for the cubic Polyak step at each
/// optimum estimate, and for the classical cubic and gradient-regularized
/// Newton baselines, on full-batch L2-regularized logistic regression.
pub fn cubic_robustness(cfg: &RobustnessConfig) -> Result<RobustnessTable, HarnessError> {
    let source = data::resolve(&cfg.dataset, cfg.data_seed)?;
    let data = data::load(&source, ObjectiveName::LogregL2.encoding())?;
    let obj = Objective::new(&data, ObjectiveKind::LogRegL2 { mu: cfg.mu });
    if obj.dim() > sania_core::objectives::DEFAULT_DENSE_CAP {
        return Err(HarnessError::Config("cubic robustness needs a dense Hessian".into()));
    }
    let (_, f_star) = newton_minimize(&obj, &vec![0.0; obj.dim()], 200)?;
    let f_hats = cfg.f_hat_grid.clone().unwrap_or_else(|| vec![f_star, f_star - 0.03, 0.0]);
    let opts = CubicOptions::default();

    let mut jobs: Vec<(&'static str, &'static str, f64)> = Vec::new();
    jobs.extend(f_hats.iter().map(|&f| ("cubic-polyak", "f_hat", f)));
    jobs.extend(cfg.cubic_l2.iter().map(|&l| ("cubic-newton", "l2", l)));
    jobs.extend(cfg.grad_reg_l2.iter().map(|&l| ("grad-reg-newton", "l2", l)));

    let rows = jobs
        .par_iter()
        .map(|&(method, parameter, value)| {
            let step: Box<Stepper<'_>> = match method {
                "cubic-polyak" => Box::new(move |w, f, g, h| {
                    let ctx = StepContext::new(w, f, value, g).with_curvature(Curvature::Dense(h));
                    cubic_polyak_step(&ctx, &opts).map(|r| r.w_next).map_err(|e| e.to_string())
                }),
                "cubic-newton" => Box::new(move |w, _, g, h| {
                    let step = cubic_newton_step(h, g, value).map_err(|e| e.to_string())?;
                    Ok(w.iter().zip(&step).map(|(a, b)| a + b).collect())
                }),
                _ => Box::new(move |w, f, g, h| {
                    let ctx = StepContext::new(w, f, 0.0, g).with_curvature(Curvature::Dense(h));
                    grad_reg_newton_step(&ctx, value).map(|r| r.w_next).map_err(|e| e.to_string())
                }),
            };
            let (iterations, final_gap, error) = count_iterations(&obj, cfg.init, f_star, cfg, step.as_ref());
            RobustnessRow { method, parameter, value, iterations, final_gap, error }
        })
        .collect();
    Ok(RobustnessTable { config: cfg.clone(), f_star, rows })
}

impl RobustnessTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "parameter", "value", "iterations", "final_gap", "converged"]).unwrap();
        for r in &self.rows {
            w.write_record([
                r.method.to_string(),
                r.parameter.to_string(),
                format_float(r.value),
                r.iterations.map(|i| i.to_string()).unwrap_or_default(),
                format_float(r.final_gap),
                r.iterations.is_some().to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn cubic_polyak_iterations(&self) -> Vec<Option<usize>> {
        self.rows.iter().filter(|r| r.method == "cubic-polyak").map(|r| r.iterations).collect()
    }
}
