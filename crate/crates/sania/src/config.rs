use std::path::PathBuf;

use sania_core::{LabelEncoding, ObjectiveKind, PrecondConfig};
use serde::Serialize;

use crate::method::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveName {
    Logreg,
    Nllsq,
    LogregL2,
}

impl ObjectiveName {
    pub fn kind(self, mu: f64) -> ObjectiveKind {
        match self {
            ObjectiveName::Logreg => ObjectiveKind::LogReg,
            ObjectiveName::Nllsq => ObjectiveKind::Nllsq,
            ObjectiveName::LogregL2 => ObjectiveKind::LogRegL2 { mu },
        }
    }

    pub fn encoding(self) -> LabelEncoding {
        match self {
            ObjectiveName::Nllsq => LabelEncoding::ZeroOne,
            _ => LabelEncoding::PlusMinusOne,
        }
    }
}

impl std::str::FromStr for ObjectiveName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "logreg" => Ok(ObjectiveName::Logreg),
            "nllsq" => Ok(ObjectiveName::Nllsq),
            "logreg-l2" => Ok(ObjectiveName::LogregL2),
            _ => Err(format!("unknown objective `{s}` (logreg, nllsq, logreg-l2)")),
        }
    }
}

/// Preconditioner hyperparameters in serializable form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecondParams {
    pub eps: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub hutchinson_beta: f64,
    pub mu_floor: f64,
    pub k_init: usize,
}

impl Default for PrecondParams {
    fn default() -> Self {
        PrecondParams::from(PrecondConfig::default())
    }
}

impl From<PrecondConfig> for PrecondParams {
    fn from(c: PrecondConfig) -> Self {
        PrecondParams {
            eps: c.eps,
            beta1: c.beta1,
            beta2: c.beta2,
            hutchinson_beta: c.hutchinson_beta,
            mu_floor: c.mu_floor,
            k_init: c.k_init,
        }
    }
}

impl From<PrecondParams> for PrecondConfig {
    fn from(p: PrecondParams) -> Self {
        PrecondConfig {
            eps: p.eps,
            beta1: p.beta1,
            beta2: p.beta2,
            hutchinson_beta: p.hutchinson_beta,
            mu_floor: p.mu_floor,
            k_init: p.k_init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// `synthetic[:N:D]`, a path, or a file name in the data directory.
    pub dataset: String,
    /// Seed of the synthetic generator.
    pub data_seed: u64,
    pub objective: ObjectiveName,
    /// Ridge weight of `logreg-l2`.
    pub mu: f64,
    pub method: Method,
    /// `None` is full batch.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub seed: u64,
    /// Column scaling range; 0 keeps the data.
    pub scale_k: f64,
    /// Seed of the scaling vector; defaults to `seed`.
    pub scale_seed: Option<u64>,
    /// Learning rate of the baselines.
    pub step_size: Option<f64>,
    /// Hessian Lipschitz constant of `grad-reg-newton`.
    pub l2: Option<f64>,
    /// Optimum estimate used by `logreg-l2`.
    pub f_hat: f64,
    pub precond: PrecondParams,
    pub adadelta_rho: f64,
    pub adadelta_eps: f64,
    pub cg_tol: f64,
    /// CG iteration cap; `None` is the dimension.
    pub cg_max_iter: Option<usize>,
    pub gamma_mix: f64,
    pub eta_cap: f64,
    /// Largest dimension for dense Hessians.
    pub dense_cap: usize,
    /// Every coordinate of the initial point.
    pub init: f64,
    /// Override of the per-method epoch reset of preconditioner statistics.
    pub reset_each_epoch: Option<bool>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: "synthetic".into(),
            data_seed: 0,
            objective: ObjectiveName::Logreg,
            mu: 1e-4,
            method: Method::SaniaQn(crate::method::Precond::AdamSqr),
            batch_size: None,
            epochs: 10,
            seed: 0,
            scale_k: 0.0,
            scale_seed: None,
            step_size: None,
            l2: None,
            f_hat: 0.0,
            precond: PrecondParams::default(),
            adadelta_rho: 0.9,
            adadelta_eps: 1e-6,
            cg_tol: 1e-10,
            cg_max_iter: None,
            gamma_mix: 0.5,
            eta_cap: 10.0,
            dense_cap: sania_core::objectives::DEFAULT_DENSE_CAP,
            init: 0.0,
            reset_each_epoch: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn objective_kind(&self) -> ObjectiveKind {
        self.objective.kind(self.mu)
    }

    pub fn scale_seed(&self) -> u64 {
        self.scale_seed.unwrap_or(self.seed)
    }

    pub fn epoch_reset(&self) -> bool {
        self.reset_each_epoch.unwrap_or(false)
    }
}
