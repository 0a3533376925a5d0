//! The seeded training loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sania_core::datasets::scale_columns;
use sania_core::preconditioners::PrecondError;
use sania_core::steppers::{
    cubic_polyak_step, grad_reg_newton_step, preconditioned_sgd_step, psps_step, sania_newton_step,
    sania_pcg_convex_step, sania_pcg_nonconvex_step, sania_qn_step, sgd_step, sps_step, AdadeltaState,
    CubicOptions, PcgOptions,
};
use sania_core::vector::{is_finite, norm2};
use sania_core::{
    BatchSchedule, Curvature, DatasetError, Objective, PrecondKind, PrecondState, ScalingVector,
    SparseDataset, StepContext, StepError, StepResult,
};

use crate::config::{ObjectiveName, RunConfig};
use crate::data::{self, DataError};
use crate::method::{Method, Precond};
use crate::trace::{RunStatus, TraceMetadata, TraceRow, TrainTrace};

/// Stream offsets keeping Hutchinson's draws apart from the epoch permutations.
const HUTCHINSON_BATCH_STREAM: u64 = 1 << 40;
const HUTCHINSON_PROBE_STREAM: u64 = 1 << 41;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("method `{method}` cannot be used with objective `{objective}`: {reason}")]
    Incompatible { method: String, objective: String, reason: &'static str },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Stable machine-readable error class.
    pub fn code(&self) -> &'static str {
        match self {
            HarnessError::Data(DataError::Missing { .. }) => "dataset-missing",
            HarnessError::Data(_) | HarnessError::Dataset(_) => "dataset-error",
            HarnessError::Precond(_) | HarnessError::Config(_) => "invalid-config",
            HarnessError::Incompatible { .. } => "incompatible-method",
            HarnessError::Io(_) => "io-error",
        }
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn objective_name(o: ObjectiveName) -> String {
    serde_json::to_value(o).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Checks method/objective compatibility and parameter ranges for a
/// dataset of `n` rows and `d` columns.
pub fn validate(cfg: &RunConfig, n: usize, d: usize) -> Result<(), HarnessError> {
    let method = cfg.method;
    let incompatible = |reason| HarnessError::Incompatible {
        method: method.to_string(),
        objective: objective_name(cfg.objective),
        reason,
    };
    match (method.takes_step_size(), cfg.step_size) {
        (true, None) => return Err(config_err(format!("method `{method}` needs --step-size"))),
        (true, Some(g)) if !(g > 0.0 && g.is_finite()) => {
            return Err(config_err(format!("step size must be positive, got {g}")))
        }
        (false, Some(_)) => {
            return Err(config_err(format!("method `{method}` takes no learning rate")))
        }
        _ => {}
    }
    if method.requires_convex() && cfg.objective == ObjectiveName::Nllsq {
        return Err(incompatible("needs a positive definite Hessian; use sania-pcg-nonconvex"));
    }
    if let Method::SaniaPcg { nonconvex: true, .. } = method {
        if cfg.objective != ObjectiveName::Nllsq {
            return Err(incompatible("the non-convex CG variant pairs with nllsq"));
        }
    }
    let full_batch = cfg.batch_size.is_none_or(|b| b >= n);
    if method == Method::CubicPolyak && cfg.objective != ObjectiveName::LogregL2 && !full_batch {
        return Err(incompatible("needs logreg-l2 or full-batch mode"));
    }
    if method == Method::GradRegNewton && !cfg.l2.is_some_and(|l| l > 0.0 && l.is_finite()) {
        return Err(config_err("grad-reg-newton needs a positive --l2"));
    }
    if method == Method::SaniaNewton && d > cfg.dense_cap {
        return Err(config_err(format!("sania-newton needs a dense Hessian but d = {d} > {}", cfg.dense_cap)));
    }
    if let Some(b) = cfg.batch_size {
        if b == 0 || b > n {
            return Err(config_err(format!("batch size {b} outside 1..={n}")));
        }
    }
    if !(cfg.scale_k >= 0.0 && cfg.scale_k.is_finite()) {
        return Err(config_err(format!("scale-k must be non-negative, got {}", cfg.scale_k)));
    }
    if cfg.mu.is_nan() || cfg.mu < 0.0 {
        return Err(config_err(format!("mu must be non-negative, got {}", cfg.mu)));
    }
    if !cfg.f_hat.is_finite() || !cfg.init.is_finite() {
        return Err(config_err("f-hat and init must be finite"));
    }
    if n == 0 || d == 0 {
        return Err(config_err("dataset is empty"));
    }
    Ok(())
}

/// Loads the configured dataset and applies the configured column scaling.
pub fn prepare(cfg: &RunConfig) -> Result<(SparseDataset, Option<ScalingVector>), HarnessError> {
    let source = data::resolve(&cfg.dataset, cfg.data_seed)?;
    let base = data::load(&source, cfg.objective.encoding())?;
    if cfg.scale_k == 0.0 {
        return Ok((base, None));
    }
    let (scaled, v) = scale_columns(&base, cfg.scale_k, cfg.scale_seed())?;
    Ok((scaled, Some(v)))
}

pub fn run(cfg: &RunConfig) -> Result<TrainTrace, HarnessError> {
    let (data, _) = prepare(cfg)?;
    run_on(cfg, &data)
}

/// Runs on an already prepared dataset; `cfg.scale_k` is informational here.
pub fn run_on(cfg: &RunConfig, data: &SparseDataset) -> Result<TrainTrace, HarnessError> {
    Ok(run_detailed(cfg, data, false)?.trace)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: TrainTrace,
    /// `w_0, w_1, ...` when requested.
    pub iterates: Vec<Vec<f64>>,
    pub w: Vec<f64>,
}

enum Driver {
    Plain,
    Precond(PrecondState),
    Adadelta(AdadeltaState),
}

struct Counters {
    below_f_star: usize,
    skipped: usize,
    negative_curvature: usize,
}

pub fn run_detailed(cfg: &RunConfig, data: &SparseDataset, record_iterates: bool) -> Result<RunOutput, HarnessError> {
    let (n, d) = (data.rows(), data.cols());
    validate(cfg, n, d)?;
    let obj = Objective::new(data, cfg.objective_kind()).with_f_hat(cfg.f_hat).with_dense_cap(cfg.dense_cap);
    let batch_size = cfg.batch_size.unwrap_or(n);
    let full = obj.full_batch();
    let mut w = vec![cfg.init; d];
    let mut iterates = Vec::new();
    if record_iterates {
        iterates.push(w.clone());
    }

    let method = cfg.method;
    let mut driver = match method {
        Method::Adadelta => Driver::Adadelta(
            AdadeltaState::new(d, cfg.adadelta_rho, cfg.adadelta_eps).map_err(|e| config_err(e.to_string()))?,
        ),
        m => match m.precond() {
            Some(p) => Driver::Precond(PrecondState::new(p.kind(), cfg.precond.into(), d)?),
            None => Driver::Plain,
        },
    };
    let mut probe_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    probe_rng.set_stream(HUTCHINSON_PROBE_STREAM);
    let mut hutchinson_init_batches = None;
    if let Driver::Precond(state) = &mut driver {
        if *state.kind() == PrecondKind::Hutchinson {
            let mut batches = Vec::with_capacity(cfg.precond.k_init);
            for j in 0..cfg.precond.k_init as u64 {
                let sched = BatchSchedule::new(n, batch_size, cfg.seed, HUTCHINSON_BATCH_STREAM + j);
                batches.push(sched.batches()?.swap_remove(0));
            }
            let w0 = w.clone();
            state.hutchinson_init(&mut probe_rng, |j, z| obj.hvp(&w0, &batches[j], z))?;
            hutchinson_init_batches = Some(batches);
        }
    }

    let mut rows = Vec::new();
    let mut counters = Counters { below_f_star: 0, skipped: 0, negative_curvature: 0 };
    let mut pcg_b: Option<Vec<f64>> = None;
    let epoch_reset = cfg.epoch_reset();
    let status = 'train: {
        if let Some(reason) = push_evaluation(&obj, &w, &full, 0, 0, &mut rows) {
            break 'train RunStatus::Aborted { epoch: 0, step: 0, reason };
        }
        for epoch in 1..=cfg.epochs {
            if epoch_reset {
                if let Driver::Precond(state) = &mut driver {
                    if *state.kind() != PrecondKind::Hutchinson {
                        state.reset();
                    }
                }
                pcg_b = None;
            }
            let batches = BatchSchedule::new(n, batch_size, cfg.seed, (epoch - 1) as u64).batches()?;
            for (step, batch) in batches.iter().enumerate() {
                let abort = |reason: String| RunStatus::Aborted { epoch, step, reason };
                let eval = obj.evaluate(&w, batch);
                if !eval.value.is_finite() || !is_finite(&eval.gradient) {
                    break 'train abort("non-finite minibatch loss or gradient".into());
                }
                let ctx = StepInputs { cfg, obj: &obj, batch, w: &w, loss: eval.value, g: &eval.gradient };
                let result = match ctx.step(&mut driver, &mut probe_rng, &mut pcg_b) {
                    Ok(r) => r,
                    Err(e) => break 'train abort(e),
                };
                let diag = &result.diagnostics;
                counters.below_f_star += diag.below_f_star as usize;
                counters.skipped += diag.skipped as usize;
                counters.negative_curvature += diag.negative_curvature as usize;
                rows.push(TraceRow {
                    epoch,
                    step,
                    loss: eval.value,
                    full_train_loss: None,
                    train_accuracy: None,
                    grad_norm: norm2(&eval.gradient),
                    lambda: Some(result.lambda),
                    kappa: diag.kappa,
                });
                if !is_finite(&result.w_next) {
                    break 'train abort("non-finite iterate".into());
                }
                w = result.w_next;
                if record_iterates {
                    iterates.push(w.clone());
                }
            }
            if let Some(reason) = push_evaluation(&obj, &w, &full, epoch, batches.len(), &mut rows) {
                break 'train RunStatus::Aborted { epoch, step: batches.len(), reason };
            }
        }
        RunStatus::Completed
    };

    let metadata = TraceMetadata {
        config: cfg.clone(),
        dataset_rows: n,
        dataset_cols: d,
        sampling: "without-replacement permutation per epoch",
        loss_curve: "full-train loss at epoch summary rows",
        epoch_reset,
        hutchinson_init_batches,
        below_f_star_steps: counters.below_f_star,
        skipped_steps: counters.skipped,
        negative_curvature_steps: counters.negative_curvature,
        status,
    };
    Ok(RunOutput { trace: TrainTrace { rows, metadata }, iterates, w })
}

/// Appends a full-train evaluation row; returns an abort reason on a
/// non-finite loss.
fn push_evaluation(
    obj: &Objective<'_>,
    w: &[f64],
    full: &[usize],
    epoch: usize,
    step: usize,
    rows: &mut Vec<TraceRow>,
) -> Option<String> {
    let eval = obj.evaluate(w, full);
    if !eval.value.is_finite() {
        return Some("non-finite full-train loss".into());
    }
    rows.push(TraceRow {
        epoch,
        step,
        loss: eval.value,
        full_train_loss: Some(eval.value),
        train_accuracy: Some(obj.accuracy(w)),
        grad_norm: norm2(&eval.gradient),
        lambda: None,
        kappa: None,
    });
    None
}

struct StepInputs<'a> {
    cfg: &'a RunConfig,
    obj: &'a Objective<'a>,
    batch: &'a [usize],
    w: &'a [f64],
    loss: f64,
    g: &'a [f64],
}

impl StepInputs<'_> {
    fn step(
        &self,
        driver: &mut Driver,
        rng: &mut ChaCha8Rng,
        pcg_b: &mut Option<Vec<f64>>,
    ) -> Result<StepResult, String> {
        let se = |e: StepError| e.to_string();
        let (cfg, obj, w, g) = (self.cfg, self.obj, self.w, self.g);
        let f_star = obj.f_star(self.batch);
        let base = StepContext::new(w, self.loss, f_star, g);
        let pcg_opts = PcgOptions { tol: cfg.cg_tol, max_iter: cfg.cg_max_iter };
        let hessian = || obj.hessian_at(w, self.batch);
        let dense = || obj.hessian_dense(w, self.batch).map_err(|e| e.to_string());
        match cfg.method {
            Method::Sgd => sgd_step(&base.with_step_size(cfg.step_size.unwrap_or_default())).map_err(se),
            Method::Sps => sps_step(&base).map_err(se),
            Method::Adadelta => match driver {
                Driver::Adadelta(st) => st.step(w, g, cfg.step_size.unwrap_or_default()).map_err(se),
                _ => unreachable!("adadelta driver"),
            },
            Method::Preconditioned(_) | Method::Psps(_) | Method::SaniaQn(_) => {
                let Driver::Precond(state) = driver else { unreachable!("preconditioned driver") };
                let pre = self.precondition(state, rng)?;
                let ctx = StepContext::new(w, self.loss, f_star, &pre.m).with_b(&pre.b);
                match cfg.method {
                    Method::Preconditioned(_) => {
                        preconditioned_sgd_step(&ctx.with_step_size(cfg.step_size.unwrap_or_default()))
                    }
                    Method::Psps(_) => psps_step(&ctx),
                    _ => sania_qn_step(&ctx),
                }
                .map_err(se)
            }
            Method::SaniaPcg { precond, nonconvex } => {
                let Driver::Precond(state) = driver else { unreachable!("preconditioned driver") };
                let m_inv: Vec<f64> = match (precond, pcg_b.as_ref()) {
                    (Precond::Identity, _) | (_, None) => vec![1.0; w.len()],
                    (_, Some(b)) => b.iter().map(|&bj| if bj > 0.0 { 1.0 / bj } else { 1.0 }).collect(),
                };
                let hessian = hessian();
                let apply = |v: &[f64], out: &mut [f64]| hessian.apply_into(v, out);
                let ctx = base.with_curvature(Curvature::Operator { apply: &apply, dim: w.len() });
                let out = if nonconvex {
                    sania_pcg_nonconvex_step(&ctx, &m_inv, &pcg_opts, cfg.gamma_mix, cfg.eta_cap)
                } else {
                    sania_pcg_convex_step(&ctx, &m_inv, &pcg_opts)
                }
                .map_err(se)?;
                if precond != Precond::Identity {
                    *pcg_b = Some(self.precondition(state, rng)?.b);
                }
                Ok(out)
            }
            Method::SaniaNewton => {
                let h = dense()?;
                sania_newton_step(&base.with_curvature(Curvature::Dense(&h))).map_err(se)
            }
            Method::CubicPolyak | Method::GradRegNewton => {
                let h = if w.len() <= cfg.dense_cap { Some(dense()?) } else { None };
                let hessian = hessian();
                let apply = |v: &[f64], out: &mut [f64]| hessian.apply_into(v, out);
                let curvature = match &h {
                    Some(h) => Curvature::Dense(h),
                    None => Curvature::Operator { apply: &apply, dim: w.len() },
                };
                let ctx = base.with_curvature(curvature);
                if cfg.method == Method::CubicPolyak {
                    let opts = CubicOptions { cg: pcg_opts, ..CubicOptions::default() };
                    cubic_polyak_step(&ctx, &opts).map_err(se)
                } else {
                    grad_reg_newton_step(&ctx, cfg.l2.unwrap_or_default()).map_err(se)
                }
            }
        }
    }

    fn precondition(
        &self,
        state: &mut PrecondState,
        rng: &mut ChaCha8Rng,
    ) -> Result<sania_core::Preconditioned, String> {
        if *state.kind() == PrecondKind::Hutchinson {
            let (w, batch) = (self.w, self.batch);
            state.hutchinson_update(rng, |z| self.obj.hvp(w, batch, z), self.g)
        } else {
            state.update(self.g)
        }
        .map_err(|e| e.to_string())
    }
}
