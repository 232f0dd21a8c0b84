//! Semistochastic quadratic-bound optimization for log-linear models.
//!
//! The crate implements maximum-likelihood training of finite-outcome
//! log-linear models (binary logistic regression being the shipped instance)
//! by repeatedly minimizing a quadratic upper bound on the log partition
//! function. Each iteration estimates the bound's gradient and factored
//! curvature on two independently drawn mini-batches whose sizes grow over
//! the run, then takes a damped step through a truncated least-squares
//! solve. Constant-step SGD, averaged SGD, and SAG baselines, a LIBSVM data
//! loader, and a CSV benchmark harness round out the toolkit.
//!
//! Everything is deterministic given a seed: batch draws and example picks
//! come from counter-based RNG streams keyed by `(seed, purpose, iteration)`.

pub mod bench;
pub mod bound;
pub mod data;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod sampling;
pub mod solver;
pub mod sparse;

pub use bench::{MetricsRow, RunConfig};
pub use bound::{BatchBound, BoundFactors, SingleBound};
pub use error::{Error, Result};
pub use model::{LogLinearModel, LogisticInstance, Objective};
pub use optimizer::{Method, OptimizerState, SqbConfig};
pub use sampling::{BatchDraw, BatchSchedule};
pub use solver::{CurvatureOperator, SolveReport};
pub use sparse::SparseVec;
