//! Per-step metric rows and their CSV form.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;

pub const CSV_HEADER: [&str; 12] = [
    "epoch",
    "step",
    "loss",
    "full_train_loss",
    "train_accuracy",
    "grad_norm",
    "lambda",
    "kappa",
    "method",
    "dataset",
    "scale_k",
    "seed",
];

/// One optimizer step, or an evaluation of the full training set.
///
/// Step rows carry the minibatch loss and gradient norm before the step and
/// the step multiplier. Evaluation rows (the initial row `(0, 0)` and the
/// summary closing each epoch, whose `step` equals the number of batches)
/// carry full-train metrics instead.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub full_train_loss: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub grad_norm: f64,
    pub lambda: Option<f64>,
    pub kappa: Option<f64>,
}

impl TraceRow {
    pub fn is_evaluation(&self) -> bool {
        self.full_train_loss.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    Aborted { epoch: usize, step: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMetadata {
    pub config: RunConfig,
    pub dataset_rows: usize,
    pub dataset_cols: usize,
    pub sampling: &'static str,
    pub loss_curve: &'static str,
    pub epoch_reset: bool,
    /// Batches that seeded Hutchinson's estimate, drawn before step 0.
    pub hutchinson_init_batches: Option<Vec<Vec<usize>>>,
    /// Steps whose loss fell below the optimum estimate.
    pub below_f_star_steps: usize,
    /// Non-convex CG steps skipped for lack of a descent direction.
    pub skipped_steps: usize,
    pub negative_curvature_steps: usize,
    #[serde(flatten)]
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
    pub metadata: TraceMetadata,
}

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

impl TrainTrace {
    pub fn aborted(&self) -> bool {
        matches!(self.metadata.status, RunStatus::Aborted { .. })
    }

    /// Epoch summary rows, starting with the initial evaluation.
    pub fn evaluations(&self) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(|r| r.is_evaluation())
    }

    pub fn final_evaluation(&self) -> Option<&TraceRow> {
        self.evaluations().last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        let cfg = &self.metadata.config;
        let (method, scale_k, seed) = (cfg.method.to_string(), format_float(cfg.scale_k), cfg.seed.to_string());
        for r in &self.rows {
            w.write_record([
                r.epoch.to_string(),
                r.step.to_string(),
                format_float(r.loss),
                opt(r.full_train_loss),
                opt(r.train_accuracy),
                format_float(r.grad_norm),
                opt(r.lambda),
                opt(r.kappa),
                method.clone(),
                cfg.dataset.clone(),
                scale_k.clone(),
                seed.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn metadata_json(&self) -> String {
        serde_json::to_string_pretty(&self.metadata).expect("metadata serializes")
    }

    /// Writes `path` and a `<path>.meta.json` sidecar.
    pub fn save(&self, path: &Path) -> std::io::Result<PathBuf> {
        std::fs::write(path, self.to_csv_string())?;
        let meta = sidecar_path(path);
        std::fs::write(&meta, self.metadata_json())?;
        Ok(meta)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}
