//! Polyak-type stochastic optimization over generalized linear models.
//!
//! Every update rule in this crate is an instance of one constrained
//! projection problem: move as little as possible in a (preconditioned)
//! norm while forcing a local model of the sampled loss down to its known
//! optimum. Depending on the norm and the curvature term in the model this
//! yields SGD, SPS, preconditioned SPS, the square-root-free AdaGrad/Adam
//! variants, Newton with a Polyak step, CG-based Newton for convex and
//! non-convex losses, and a gradient-regularized Newton step with a Polyak
//! constraint.
//!
//! The crate is `no_std` (with `alloc`). File IO, CSV traces and the
//! experiment CLI live in the companion `sania` crate.
//!
//! Layout:
//! - [`datasets`]: sparse binary-classification datasets, LibSVM text,
//!   the synthetic generator, column scaling and batch schedules.
//! - [`objectives`]: logistic regression (optionally L2-regularized) and
//!   non-linear least squares with exact derivative oracles.
//! - [`preconditioners`]: AdaGrad, Adam, their square-root-free variants and
//!   Hutchinson's Hessian-diagonal estimator.
//! - [`steppers`]: the update rules.
//! - [`linsolve`]: PCG, the κ bisection and dense symmetric kernels.
#![no_std]
// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod datasets;
pub mod linsolve;
pub mod objectives;
pub mod preconditioners;
pub mod steppers;
pub mod vector;

pub use datasets::{BatchSchedule, DatasetError, LabelEncoding, ScalingVector, SparseDataset};
pub use objectives::{BatchEval, Objective, ObjectiveError, ObjectiveKind};
pub use preconditioners::{PrecondConfig, PrecondKind, PrecondState, Preconditioned};
pub use steppers::{Curvature, StepContext, StepDiagnostics, StepError, StepResult};
