use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sania::config::{ObjectiveName, PrecondParams, RunConfig};
use sania::experiments::{cubic_robustness, invariance_report, lr_sweep, RobustnessConfig};
use sania::runner::{prepare, run_on, HarnessError};
use sania::{data, Method};

/// Polyak-type stochastic optimizers on GLM objectives.
///
/// Named datasets are read from the directory in `SANIA_DATA_DIR`
/// (default `./data`); `synthetic[:N:D]` generates one instead.
#[derive(Parser)]
#[command(name = "sania", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and emit the CSV trace.
    Run(RunArgs),
    /// Compare a method on a dataset and on its column-scaled copy.
    Invariance(InvarianceArgs),
    /// Sweep a learning-rate baseline over `γ = 2^n`.
    LrSweep(SweepArgs),
    /// Iterations-to-tolerance of the cubic Polyak step across optimum estimates.
    CubicRobustness(RobustnessArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "synthetic")]
    dataset: String,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// logreg, nllsq or logreg-l2
    #[arg(long, default_value = "logreg")]
    objective: ObjectiveName,
    #[arg(long, default_value_t = 1e-4)]
    mu: f64,
    /// e.g. sania-adam-sqr, sania-adagrad-sqr, psps-adagrad, sps, adam,
    /// sania-pcg-adagrad-sqr, sania-pcg-nonconvex, sania-newton, cubic-polyak
    #[arg(long, default_value = "sania-adam-sqr")]
    method: Method,
    /// Omit for full batch.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    scale_k: f64,
    #[arg(long)]
    scale_seed: Option<u64>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    f_hat: f64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 0.999)]
    hutchinson_beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    mu_floor: f64,
    #[arg(long, default_value_t = 10)]
    k_init: usize,
    #[arg(long, default_value_t = 0.9)]
    adadelta_rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    adadelta_eps: f64,
    #[arg(long, default_value_t = 1e-10)]
    cg_tol: f64,
    #[arg(long)]
    cg_max_iter: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    gamma_mix: f64,
    #[arg(long, default_value_t = 10.0)]
    eta_cap: f64,
    #[arg(long, default_value_t = 2000)]
    dense_cap: usize,
    #[arg(long, default_value_t = 0.0)]
    init: f64,
    #[arg(long)]
    reset_each_epoch: Option<bool>,
    /// CSV destination (stdout if omitted); a `.meta.json` sidecar is written next to it.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the (scaled) training set in LibSVM format.
    #[arg(long)]
    export_scaled: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self, default_eps: f64) -> RunConfig {
        RunConfig {
            dataset: self.dataset.clone(),
            data_seed: self.data_seed,
            objective: self.objective,
            mu: self.mu,
            method: self.method,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            scale_k: self.scale_k,
            scale_seed: self.scale_seed,
            step_size: self.step_size,
            l2: self.l2,
            f_hat: self.f_hat,
            precond: PrecondParams {
                eps: self.eps.unwrap_or(default_eps),
                beta1: self.beta1,
                beta2: self.beta2,
                hutchinson_beta: self.hutchinson_beta,
                mu_floor: self.mu_floor,
                k_init: self.k_init,
            },
            adadelta_rho: self.adadelta_rho,
            adadelta_eps: self.adadelta_eps,
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
            gamma_mix: self.gamma_mix,
            eta_cap: self.eta_cap,
            dense_cap: self.dense_cap,
            init: self.init,
            reset_each_epoch: self.reset_each_epoch,
            output: self.output.clone(),
        }
    }
}

#[derive(Args)]
struct InvarianceArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Scaling range of the comparison dataset.
    #[arg(long, default_value_t = 2.0)]
    k: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated exponents n of `γ = 2^n`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
          default_value = "-20,-19,-18,-17,-16,-15,-14,-13,-12,-11,-10,-9,-8,-7,-6,-5,-4,-3,-2,-1,0,1,2,3,4,5")]
    grid: Vec<i32>,
}

#[derive(Args)]
struct RobustnessArgs {
    #[arg(long, default_value = "synthetic:1000:100")]
    dataset: String,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    mu: f64,
    /// Every coordinate of the starting point.
    #[arg(long, default_value_t = 3.0)]
    init: f64,
    /// Optimum estimates; defaults to the computed optimum, optimum - 0.03 and 0.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    f_hat_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.0004")]
    l2_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.0004")]
    grad_reg_l2: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn emit(output: Option<&PathBuf>, body: &str, meta: Option<String>) -> Result<(), HarnessError> {
    match output {
        Some(path) => {
            std::fs::write(path, body)?;
            if let Some(meta) = meta {
                std::fs::write(sania::trace::sidecar_path(path), meta)?;
            }
        }
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.config(sania_core::PrecondConfig::default().eps);
            let (data, _) = prepare(&cfg)?;
            if let Some(path) = &args.export_scaled {
                data::write_libsvm(path, &data)?;
            }
            let trace = run_on(&cfg, &data)?;
            emit(cfg.output.as_ref(), &trace.to_csv_string(), Some(trace.metadata_json()))?;
            if let sania::trace::RunStatus::Aborted { epoch, step, reason } = &trace.metadata.status {
                eprintln!("{}", serde_json::json!({"warning": "run-aborted", "epoch": epoch, "step": step, "reason": reason}));
            }
        }
        Command::Invariance(args) => {
            // exact scaling identities need eps = 0 unless overridden
            let cfg = args.run.config(0.0);
            let report = invariance_report(&cfg, args.k, cfg.scale_seed())?;
            emit(cfg.output.as_ref(), &report.to_csv(), Some(json(&report)))?;
            eprintln!(
                "{}",
                serde_json::json!({
                    "verdict": if report.pass { "pass" } else { "fail" },
                    "max_relative_gap": report.max_relative_gap,
                    "max_iterate_error": report.max_iterate_error,
                })
            );
        }
        Command::LrSweep(args) => {
            let cfg = args.run.config(sania_core::PrecondConfig::default().eps);
            let table = lr_sweep(&cfg, &args.grid)?;
            emit(cfg.output.as_ref(), &table.to_csv(), Some(json(&table)))?;
        }
        Command::CubicRobustness(args) => {
            let cfg = RobustnessConfig {
                dataset: args.dataset,
                data_seed: args.data_seed,
                mu: args.mu,
                init: args.init,
                f_hat_grid: args.f_hat_grid,
                cubic_l2: args.l2_grid,
                grad_reg_l2: args.grad_reg_l2,
                max_iters: args.max_iters,
                tolerance: args.tolerance,
            };
            let table = cubic_robustness(&cfg)?;
            emit(args.output.as_ref(), &table.to_csv(), Some(json(&table)))?;
        }
    }
    Ok(())
}

fn error_line(code: &str, message: &str) -> String {
    serde_json::json!({ "error": code, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.code(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
