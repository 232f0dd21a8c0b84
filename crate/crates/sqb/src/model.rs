//! Finite-outcome log-linear models and the regularized maximum-likelihood
//! objective.
//!
//! A model assigns each example `j` a finite outcome space; outcome `y` has a
//! nonnegative base measure `h(j, y)` and a feature vector `f(j, y)`, and the
//! probability of `y` under parameters `theta` is
//! `h * exp(theta . f) / Z_j(theta)` with `Z_j` the partition function.
//! Binary logistic regression is the concrete instantiation shipped here:
//! outcomes `{0, 1}` with `f(1) = x_j`, `f(0) = 0`, `h = 1`.
//!
//! All exponentials go through max-shifted log-sum-exp, so inner products in
//! the hundreds (sparse high-dimensional data) stay representable.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::sparse::SparseVec;

/// Largest dimension the dense Hessian oracle will materialize.
pub const DENSE_HESSIAN_LIMIT: usize = 2000;

/// A finite-outcome log-linear model over `num_examples` observations.
pub trait LogLinearModel {
    fn num_examples(&self) -> usize;

    /// Parameter dimension `d`.
    fn dim(&self) -> usize;

    /// Number of outcomes for example `j`.
    fn outcome_count(&self, example: usize) -> usize;

    /// Feature vector of outcome `outcome` for example `example`.
    fn feature(&self, example: usize, outcome: usize) -> &SparseVec;

    /// Nonnegative base measure of the outcome.
    fn measure(&self, example: usize, outcome: usize) -> f64;

    /// The observed outcome index for the example.
    fn observed_label(&self, example: usize) -> usize;

    /// Upper bound on the Lipschitz constant of the regularized gradient:
    /// `max_{j,y} ||f(j,y)||^2 + eta` (a trace bound on the per-example
    /// feature covariance).
    fn gradient_lipschitz(&self, eta: f64) -> f64 {
        let mut max_norm = 0.0f64;
        for j in 0..self.num_examples() {
            for y in 0..self.outcome_count(j) {
                max_norm = max_norm.max(self.feature(j, y).norm_sq());
            }
        }
        max_norm + eta
    }
}

/// Binary logistic regression data: sparse inputs `x_j` and labels in `{0, 1}`.
///
/// Outcome 1 carries feature `x_j`, outcome 0 the zero vector, and both have
/// unit measure, so `p(1 | x_j, theta) = sigmoid(theta . x_j)`.
#[derive(Debug, Clone)]
pub struct LogisticInstance {
    rows: Vec<SparseVec>,
    labels: Vec<u8>,
    dim: usize,
    zero: SparseVec,
}

impl LogisticInstance {
    /// Validates that labels are binary and feature indices fit in `dim`.
    pub fn new(rows: Vec<SparseVec>, labels: Vec<u8>, dim: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::invalid(
                "labels",
                format!("{} labels for {} rows", labels.len(), rows.len()),
            ));
        }
        for (j, label) in labels.iter().enumerate() {
            if *label > 1 {
                return Err(Error::invalid(
                    "labels",
                    format!("row {j}: label {label} is not 0 or 1"),
                ));
            }
            if let Some(max) = rows[j].max_index() {
                if max as usize >= dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: max as usize + 1,
                    });
                }
            }
        }
        Ok(LogisticInstance {
            rows,
            labels,
            dim,
            zero: SparseVec::empty(),
        })
    }

    pub fn rows(&self) -> &[SparseVec] {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn max_row_norm_sq(&self) -> f64 {
        self.rows.iter().map(SparseVec::norm_sq).fold(0.0, f64::max)
    }
}

impl LogLinearModel for LogisticInstance {
    fn num_examples(&self) -> usize {
        self.rows.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn outcome_count(&self, _example: usize) -> usize {
        2
    }

    fn feature(&self, example: usize, outcome: usize) -> &SparseVec {
        match outcome {
            0 => &self.zero,
            1 => &self.rows[example],
            _ => panic!("logistic outcome index {outcome} out of range"),
        }
    }

    fn measure(&self, _example: usize, _outcome: usize) -> f64 {
        1.0
    }

    fn observed_label(&self, example: usize) -> usize {
        self.labels[example] as usize
    }

    /// The sigmoid's curvature is capped at 1/4, which tightens the generic
    /// bound to `max_j ||x_j||^2 / 4 + eta`.
    fn gradient_lipschitz(&self, eta: f64) -> f64 {
        self.max_row_norm_sq() / 4.0 + eta
    }
}

fn check_dim(theta: &Array1<f64>, dim: usize) -> Result<()> {
    if theta.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: theta.len(),
        });
    }
    Ok(())
}

/// Per-outcome log weights `log h(j, y) + theta . f(j, y)`.
///
/// Outcomes with zero measure get `-inf`; a negative measure is an error, as
/// is an example whose measures are all zero.
fn outcome_log_weights<M: LogLinearModel + ?Sized>(
    model: &M,
    example: usize,
    theta: &Array1<f64>,
) -> Result<Vec<f64>> {
    let count = model.outcome_count(example);
    let mut logs = Vec::with_capacity(count);
    let mut any_positive = false;
    for y in 0..count {
        let h = model.measure(example, y);
        if h < 0.0 {
            return Err(Error::NegativeMeasure {
                example,
                outcome: y,
                value: h,
            });
        }
        if h == 0.0 {
            logs.push(f64::NEG_INFINITY);
        } else {
            any_positive = true;
            logs.push(h.ln() + model.feature(example, y).dot(theta));
        }
    }
    if !any_positive {
        return Err(Error::AllMeasuresZero { example });
    }
    Ok(logs)
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + logs.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

/// `log Z_j(theta)`, computed with max-exponent shifting.
pub fn log_partition<M: LogLinearModel + ?Sized>(
    model: &M,
    example: usize,
    theta: &Array1<f64>,
) -> Result<f64> {
    check_dim(theta, model.dim())?;
    Ok(log_sum_exp(&outcome_log_weights(model, example, theta)?))
}

/// The partition function `Z_j(theta)`.
///
/// May overflow to infinity for extreme inner products; `log_partition` is the
/// overflow-safe form.
pub fn partition_value<M: LogLinearModel + ?Sized>(
    model: &M,
    example: usize,
    theta: &Array1<f64>,
) -> Result<f64> {
    Ok(log_partition(model, example, theta)?.exp())
}

/// Outcome probabilities `p_j(y)` at `theta`.
pub fn outcome_probabilities<M: LogLinearModel + ?Sized>(
    model: &M,
    example: usize,
    theta: &Array1<f64>,
) -> Result<Vec<f64>> {
    check_dim(theta, model.dim())?;
    let logs = outcome_log_weights(model, example, theta)?;
    let log_z = log_sum_exp(&logs);
    Ok(logs.iter().map(|&l| (l - log_z).exp()).collect())
}

/// Expected feature vector `E_{p_j}[f]` at `theta`, kept sparse.
pub fn expected_feature<M: LogLinearModel + ?Sized>(
    model: &M,
    example: usize,
    theta: &Array1<f64>,
) -> Result<SparseVec> {
    let probs = outcome_probabilities(model, example, theta)?;
    let mut mean = SparseVec::empty();
    for (y, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            mean = SparseVec::combine(1.0, &mean, p, model.feature(example, y));
        }
    }
    Ok(mean)
}

/// The L2-regularized negative log-likelihood and its exact derivatives.
///
/// The value is `(1/T) sum_j [log Z_j(theta) - theta . f_j(y_j)]
/// + (eta/2) ||theta||^2`; the per-example constant `log h_j(y_j)` is dropped
/// (it is identically zero for logistic regression).
pub struct Objective<'a, M: LogLinearModel + ?Sized> {
    model: &'a M,
    eta: f64,
}

impl<'a, M: LogLinearModel + ?Sized> Objective<'a, M> {
    pub fn new(model: &'a M, eta: f64) -> Result<Self> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::invalid("eta", format!("{eta} (must be >= 0)")));
        }
        Ok(Objective { model, eta })
    }

    pub fn model(&self) -> &'a M {
        self.model
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn value(&self, theta: &Array1<f64>) -> Result<f64> {
        let model = self.model;
        check_dim(theta, model.dim())?;
        let count = model.num_examples();
        if count == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut total = 0.0;
        for j in 0..count {
            let log_z = log_sum_exp(&outcome_log_weights(model, j, theta)?);
            let observed = model.feature(j, model.observed_label(j));
            total += log_z - observed.dot(theta);
        }
        Ok(total / count as f64 + 0.5 * self.eta * theta.dot(theta))
    }

    /// Exact gradient: `(1/T) sum_j (E_{p_j}[f] - f_j(y_j)) + eta * theta`.
    pub fn gradient(&self, theta: &Array1<f64>) -> Result<Array1<f64>> {
        let model = self.model;
        check_dim(theta, model.dim())?;
        let count = model.num_examples();
        if count == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut grad = Array1::zeros(model.dim());
        for j in 0..count {
            let probs = outcome_probabilities(model, j, theta)?;
            for (y, &p) in probs.iter().enumerate() {
                if p > 0.0 {
                    model.feature(j, y).add_scaled_to(p, &mut grad);
                }
            }
            model
                .feature(j, model.observed_label(j))
                .add_scaled_to(-1.0, &mut grad);
        }
        grad.mapv_inplace(|g| g / count as f64);
        grad.scaled_add(self.eta, theta);
        Ok(grad)
    }

    /// Gradient contribution of a single example, including the regularizer:
    /// `(E_{p_j}[f] - f_j(y_j)) + eta * theta`.
    pub fn example_gradient(&self, example: usize, theta: &Array1<f64>) -> Result<Array1<f64>> {
        let model = self.model;
        check_dim(theta, model.dim())?;
        let mut grad = theta.mapv(|t| self.eta * t);
        let probs = outcome_probabilities(model, example, theta)?;
        for (y, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                model.feature(example, y).add_scaled_to(p, &mut grad);
            }
        }
        model
            .feature(example, model.observed_label(example))
            .add_scaled_to(-1.0, &mut grad);
        Ok(grad)
    }

    /// Dense Hessian `(1/T) sum_j cov_{p_j}[f] + eta * I`.
    ///
    /// A verification oracle; refuses dimensions above
    /// [`DENSE_HESSIAN_LIMIT`].
    pub fn hessian(&self, theta: &Array1<f64>) -> Result<Array2<f64>> {
        let model = self.model;
        check_dim(theta, model.dim())?;
        let dim = model.dim();
        if dim > DENSE_HESSIAN_LIMIT {
            return Err(Error::DenseLimitExceeded {
                dim,
                limit: DENSE_HESSIAN_LIMIT,
            });
        }
        let count = model.num_examples();
        if count == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut hess = Array2::zeros((dim, dim));
        for j in 0..count {
            let probs = outcome_probabilities(model, j, theta)?;
            let mut mean = Array1::zeros(dim);
            for (y, &p) in probs.iter().enumerate() {
                if p > 0.0 {
                    model.feature(j, y).add_scaled_to(p, &mut mean);
                }
            }
            for (y, &p) in probs.iter().enumerate() {
                if p > 0.0 {
                    let mut centered = mean.mapv(|m| -m);
                    model.feature(j, y).add_scaled_to(1.0, &mut centered);
                    for a in 0..dim {
                        let ca = p * centered[a];
                        if ca != 0.0 {
                            for b in 0..dim {
                                hess[(a, b)] += ca * centered[b];
                            }
                        }
                    }
                }
            }
        }
        hess.mapv_inplace(|h| h / count as f64);
        for a in 0..dim {
            hess[(a, a)] += self.eta;
        }
        Ok(hess)
    }
}

/// Fraction of examples whose most probable outcome differs from the observed
/// label. Ties resolve to the highest outcome index (for logistic regression
/// a probability of exactly 0.5 predicts label 1).
pub fn predict_error<M: LogLinearModel + ?Sized>(test: &M, theta: &Array1<f64>) -> Result<f64> {
    check_dim(theta, test.dim())?;
    let count = test.num_examples();
    if count == 0 {
        return Err(Error::EmptyTestSet);
    }
    let mut wrong = 0usize;
    for j in 0..count {
        let logs = outcome_log_weights(test, j, theta)?;
        let mut best = 0usize;
        for (y, &l) in logs.iter().enumerate() {
            if l >= logs[best] {
                best = y;
            }
        }
        if best != test.observed_label(j) {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / count as f64)
}
