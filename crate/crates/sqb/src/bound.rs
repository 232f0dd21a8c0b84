//! Quadratic upper bounds on the log partition function.
//!
//! For one example the subroutine processes outcomes in ascending index order
//! and maintains a running partition `z`, a running mean `r`, and a list of
//! rank-1 curvature factors. On completion the quadratic
//! `z * exp((1/2) d'S d + d'r)` with `d = theta - theta_tilde` dominates
//! `Z(theta)` everywhere and touches it at `theta_tilde`, where
//! `S = sum_k w_k l_k l_k'` is the factored curvature.
//!
//! Batch accumulation averages per-example means into a bound gradient `mu`
//! and concatenates factor lists, never materializing the d-by-d matrix.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::model::LogLinearModel;
use crate::sparse::SparseVec;

/// Below this threshold `tanh(t/2)/(2t)` is evaluated by series to avoid
/// cancellation.
const WEIGHT_SERIES_THRESHOLD: f64 = 1e-8;

/// Curvature weight as a function of `t = log(alpha / z)`.
///
/// Even in `t`; equal to 1/4 at `t = 0`; 0 in the `z -> 0` limit.
fn weight_from_log_ratio(t: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    if t.abs() < WEIGHT_SERIES_THRESHOLD {
        return 0.25 * (1.0 - t * t / 12.0);
    }
    (0.5 * t).tanh() / (2.0 * t)
}

/// The scalar weight applied to each rank-1 curvature factor:
/// `tanh((1/2) log(alpha/z)) / (2 log(alpha/z))`.
///
/// Guarded regimes: `z = 0` (and ratios beyond floating-point range) give 0;
/// near-equal `alpha` and `z` use the series `(1/4)(1 - t^2/12)`.
pub fn weight_function(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("{alpha} (must be > 0)")));
    }
    if z < 0.0 {
        return Err(Error::invalid("z", format!("{z} (must be >= 0)")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    Ok(weight_from_log_ratio(alpha.ln() - z.ln()))
}

/// Bound state for a single example.
#[derive(Debug, Clone)]
pub struct SingleBound {
    /// `log Z(theta_tilde)`, the overflow-safe form of the partition value.
    pub log_partition: f64,
    /// `Z(theta_tilde)`; may overflow to infinity for extreme inner products.
    pub partition: f64,
    /// The bound's linear coefficient `r`, equal to the model mean
    /// `E[f]` at `theta_tilde`.
    pub mean: SparseVec,
    /// Rank-1 curvature factors `(l_k, w_k)` with strictly positive weights.
    pub factors: Vec<(SparseVec, f64)>,
}

impl SingleBound {
    /// Log of the quadratic bound evaluated at displacement
    /// `delta = theta - theta_tilde`.
    pub fn log_bound_value(&self, delta: &Array1<f64>) -> f64 {
        let quad: f64 = self
            .factors
            .iter()
            .map(|(l, w)| {
                let p = l.dot(delta);
                w * p * p
            })
            .sum();
        self.log_partition + 0.5 * quad + self.mean.dot(delta)
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn recurse<M: LogLinearModel + ?Sized>(
    model: &M,
    example: usize,
    theta_tilde: &Array1<f64>,
    collect_factors: bool,
) -> Result<SingleBound> {
    if example >= model.num_examples() {
        return Err(Error::invalid(
            "example",
            format!("index {example} out of range for {} examples", model.num_examples()),
        ));
    }
    if theta_tilde.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: theta_tilde.len(),
        });
    }
    let mut log_z = f64::NEG_INFINITY;
    let mut mean = SparseVec::empty();
    let mut factors = Vec::new();
    for y in 0..model.outcome_count(example) {
        let h = model.measure(example, y);
        if h < 0.0 {
            return Err(Error::NegativeMeasure {
                example,
                outcome: y,
                value: h,
            });
        }
        if h == 0.0 {
            continue;
        }
        let f = model.feature(example, y);
        let log_alpha = h.ln() + f.dot(theta_tilde);
        let t = log_alpha - log_z;
        if collect_factors {
            let w = weight_from_log_ratio(t);
            if w > 0.0 {
                factors.push((SparseVec::combine(1.0, f, -1.0, &mean), w));
            }
        }
        let s = sigmoid(t);
        mean = SparseVec::combine(1.0 - s, &mean, s, f);
        log_z = log_add_exp(log_z, log_alpha);
    }
    if log_z == f64::NEG_INFINITY {
        return Err(Error::AllMeasuresZero { example });
    }
    Ok(SingleBound {
        log_partition: log_z,
        partition: log_z.exp(),
        mean,
        factors,
    })
}

/// Runs the bound subroutine for example `example` around `theta_tilde`.
///
/// The returned partition and mean match `partition_value` and the model mean
/// exactly up to floating-point error; the factors depend on the fixed
/// ascending outcome order.
pub fn bound_single<M: LogLinearModel + ?Sized>(
    model: &M,
    example: usize,
    theta_tilde: &Array1<f64>,
) -> Result<SingleBound> {
    recurse(model, example, theta_tilde, true)
}

/// Factored curvature accumulated over a batch, plus per-example bound state.
#[derive(Debug, Clone)]
pub struct BoundFactors {
    dim: usize,
    columns: Vec<SparseVec>,
    weights: Vec<f64>,
    z_values: Vec<f64>,
    r_values: Vec<SparseVec>,
}

impl BoundFactors {
    pub fn new(dim: usize) -> Self {
        BoundFactors {
            dim,
            columns: Vec::new(),
            weights: Vec::new(),
            z_values: Vec::new(),
            r_values: Vec::new(),
        }
    }

    /// Appends a rank-1 factor `weight * column * column'`.
    pub fn push_factor(&mut self, column: SparseVec, weight: f64) -> Result<()> {
        if !(weight >= 0.0) {
            return Err(Error::invalid(
                "weight",
                format!("{weight} (must be >= 0)"),
            ));
        }
        if let Some(max) = column.max_index() {
            if max as usize >= self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    actual: max as usize + 1,
                });
            }
        }
        self.columns.push(column);
        self.weights.push(weight);
        Ok(())
    }

    /// Records one example's partition value and mean vector.
    pub fn push_example(&mut self, z: f64, r: SparseVec) {
        self.z_values.push(z);
        self.r_values.push(r);
    }

    /// Multiplies every factor weight by `scale`.
    pub fn scale_weights(&mut self, scale: f64) {
        for w in &mut self.weights {
            *w *= scale;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_factors(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[SparseVec] {
        &self.columns
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z_values
    }

    pub fn r_values(&self) -> &[SparseVec] {
        &self.r_values
    }

    /// `sum_k w_k l_k (l_k' x)`, accumulated into `out`.
    pub fn apply_into(&self, x: &Array1<f64>, out: &mut Array1<f64>) {
        for (col, &w) in self.columns.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            let p = col.dot(x);
            if p != 0.0 {
                col.add_scaled_to(w * p, out);
            }
        }
    }
}

/// Batch-averaged bound: the gradient estimate `mu` and the factored
/// curvature scaled by `1 / batch_size`.
#[derive(Debug, Clone)]
pub struct BatchBound {
    pub mu: Array1<f64>,
    pub curvature: BoundFactors,
    pub batch_size: usize,
}

fn check_batch<M: LogLinearModel + ?Sized>(model: &M, batch: &[usize]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for &j in batch {
        if j >= model.num_examples() {
            return Err(Error::invalid(
                "batch",
                format!("index {j} out of range for {} examples", model.num_examples()),
            ));
        }
    }
    Ok(())
}

/// Accumulates the bound over `batch`: `mu` is the average of
/// `r_j - f_j(y_j)` and the curvature factors are averaged by dividing each
/// weight by the batch size. Per-example `z` and `r` are retained unscaled.
pub fn bound_batch<M: LogLinearModel + ?Sized>(
    model: &M,
    batch: &[usize],
    theta_tilde: &Array1<f64>,
) -> Result<BatchBound> {
    check_batch(model, batch)?;
    let mut mu = Array1::zeros(model.dim());
    let mut curvature = BoundFactors::new(model.dim());
    for &j in batch {
        let single = recurse(model, j, theta_tilde, true)?;
        single.mean.add_scaled_to(1.0, &mut mu);
        model
            .feature(j, model.observed_label(j))
            .add_scaled_to(-1.0, &mut mu);
        for (column, weight) in single.factors {
            curvature.push_factor(column, weight)?;
        }
        curvature.push_example(single.partition, single.mean);
    }
    let inv = 1.0 / batch.len() as f64;
    mu.mapv_inplace(|v| v * inv);
    curvature.scale_weights(inv);
    Ok(BatchBound {
        mu,
        curvature,
        batch_size: batch.len(),
    })
}

/// The gradient part of `bound_batch` alone: average of `r_j - f_j(y_j)`.
///
/// Skips factor construction, which the gradient batch never needs.
pub fn batch_mean_gradient<M: LogLinearModel + ?Sized>(
    model: &M,
    batch: &[usize],
    theta_tilde: &Array1<f64>,
) -> Result<Array1<f64>> {
    check_batch(model, batch)?;
    let mut mu = Array1::zeros(model.dim());
    for &j in batch {
        let single = recurse(model, j, theta_tilde, false)?;
        single.mean.add_scaled_to(1.0, &mut mu);
        model
            .feature(j, model.observed_label(j))
            .add_scaled_to(-1.0, &mut mu);
    }
    let inv = 1.0 / batch.len() as f64;
    mu.mapv_inplace(|v| v * inv);
    Ok(mu)
}
