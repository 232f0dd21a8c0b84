//! Benchmark support: the reference optimum used to report excess cost, and
//! the experiment runner that turns one optimizer run into a CSV series of
//! convergence metrics.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::bound::bound_batch;
use crate::data::{load_dataset, split, SplitSpec};
use crate::error::{Error, Result};
use crate::model::{predict_error, LogLinearModel, LogisticInstance, Objective};
use crate::optimizer::{run, Method, SqbConfig};
use crate::sampling::BatchSchedule;
use crate::solver::CurvatureOperator;

/// Environment variable overriding the reference-optimum cache directory.
pub const CACHE_DIR_ENV: &str = "SQB_CACHE_DIR";

/// Fixed CSV column order emitted by [`run_experiment`].
pub const CSV_HEADER: &str =
    "effective_passes,wall_seconds,train_cost,train_excess_cost,test_cost,test_error";

const REFERENCE_GRADIENT_TOL: f64 = 1e-10;
const REFERENCE_MAX_ITERS: usize = 10_000;
const REFERENCE_SOLVER_CAP: usize = 100;

/// Solves for the regularized optimum with full-batch bound steps
/// (`alpha = 1`, solver depth `min(d, 100)`) until the gradient norm falls
/// below 1e-10.
///
/// Requires `eta > 0`: strong convexity is what guarantees the descent
/// iteration converges.
pub fn compute_reference_optimum<M: LogLinearModel + ?Sized>(
    model: &M,
    eta: f64,
) -> Result<(Array1<f64>, f64)> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid("eta", format!("{eta} (must be > 0)")));
    }
    let count = model.num_examples();
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    let full: Vec<usize> = (0..count).collect();
    let solver_iters = model.dim().min(REFERENCE_SOLVER_CAP).max(1);
    let objective = Objective::new(model, eta)?;
    let mut theta = Array1::zeros(model.dim());
    for _ in 0..REFERENCE_MAX_ITERS {
        let batch = bound_batch(model, &full, &theta)?;
        // With the full batch, mu + eta theta is the exact objective gradient.
        let mut rhs = batch.mu;
        rhs.scaled_add(eta, &theta);
        let gradient_norm = rhs.dot(&rhs).sqrt();
        if gradient_norm <= REFERENCE_GRADIENT_TOL {
            let cost = objective.value(&theta)?;
            return Ok((theta, cost));
        }
        let operator = CurvatureOperator::new(&batch.curvature, eta)?;
        let report = operator.solve(&rhs, solver_iters)?;
        theta.scaled_add(-1.0, &report.solution);
    }
    let final_gradient = objective.gradient(&theta)?;
    let gradient_norm = final_gradient.dot(&final_gradient).sqrt();
    if gradient_norm <= REFERENCE_GRADIENT_TOL {
        let cost = objective.value(&theta)?;
        return Ok((theta, cost));
    }
    Err(Error::ReferenceDidNotConverge {
        iterations: REFERENCE_MAX_ITERS as u64,
        achieved: gradient_norm,
        target: REFERENCE_GRADIENT_TOL,
    })
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

/// Content hash of a logistic dataset (dimension, labels, sparse rows),
/// keying the reference-optimum cache.
pub fn dataset_fingerprint(model: &LogisticInstance) -> u64 {
    let mut hash = Fnv1a::new();
    hash.write(&(model.dim() as u64).to_le_bytes());
    hash.write(&(model.num_examples() as u64).to_le_bytes());
    for (row, &label) in model.rows().iter().zip(model.labels()) {
        hash.write(&[label]);
        hash.write(&(row.nnz() as u64).to_le_bytes());
        for (index, value) in row.iter() {
            hash.write(&index.to_le_bytes());
            hash.write(&value.to_bits().to_le_bytes());
        }
    }
    hash.0
}

#[derive(Serialize, Deserialize)]
struct CachedOptimum {
    theta: Vec<f64>,
    cost: f64,
}

/// The cache directory: `SQB_CACHE_DIR` when set, a fixed temp-dir location
/// otherwise.
pub fn default_cache_dir() -> PathBuf {
    match std::env::var_os(CACHE_DIR_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => std::env::temp_dir().join("sqb-reference-cache"),
    }
}

/// [`compute_reference_optimum`] with an on-disk cache keyed by
/// `(dataset fingerprint, eta)`. Unreadable cache entries are recomputed and
/// overwritten; `None` disables caching.
pub fn cached_reference_optimum(
    model: &LogisticInstance,
    eta: f64,
    cache_dir: Option<&Path>,
) -> Result<(Array1<f64>, f64)> {
    let Some(dir) = cache_dir else {
        return compute_reference_optimum(model, eta);
    };
    let file = format!(
        "refopt-{:016x}-{:016x}.json",
        dataset_fingerprint(model),
        eta.to_bits()
    );
    let path = dir.join(file);
    if let Ok(bytes) = fs::read(&path) {
        match serde_json::from_slice::<CachedOptimum>(&bytes) {
            Ok(entry) if entry.theta.len() == model.dim() => {
                return Ok((Array1::from_vec(entry.theta), entry.cost));
            }
            _ => log::warn!("ignoring stale reference cache entry {}", path.display()),
        }
    }
    let (theta, cost) = compute_reference_optimum(model, eta)?;
    let entry = CachedOptimum {
        theta: theta.to_vec(),
        cost,
    };
    let payload = serde_json::to_vec(&entry).expect("reference optimum serializes");
    if let Err(err) = fs::create_dir_all(dir).and_then(|_| fs::write(&path, payload)) {
        log::warn!("could not write reference cache {}: {err}", path.display());
    }
    Ok((theta, cost))
}

/// Full configuration of one benchmark run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data_path: PathBuf,
    pub method: Method,
    pub alpha: f64,
    /// Ridge strength; `None` resolves to `1 / T` on the training split.
    pub eta: Option<f64>,
    pub gamma_mu: f64,
    pub gamma_sigma: f64,
    pub solver_iters: usize,
    pub b1_mu: usize,
    pub b1_sigma: usize,
    pub cap_sigma: usize,
    pub passes: f64,
    pub seed: u64,
    pub out_path: PathBuf,
    pub split_fraction: f64,
    pub split_seed: u64,
}

impl RunConfig {
    /// Benchmark defaults: growth rates for a mid-sized dense problem, both
    /// initial batch sizes 5, curvature cap 200, a 90/10 split and a 10-pass
    /// budget.
    pub fn defaults(data_path: PathBuf, method: Method, out_path: PathBuf) -> Self {
        RunConfig {
            data_path,
            method,
            alpha: 1.0,
            eta: None,
            gamma_mu: 0.05,
            gamma_sigma: 0.001,
            solver_iters: 5,
            b1_mu: 5,
            b1_sigma: 5,
            cap_sigma: 200,
            passes: 10.0,
            seed: 0,
            out_path,
            split_fraction: 0.9,
            split_seed: 0,
        }
    }
}

/// One record of the convergence series.
#[derive(Debug, Clone, Copy)]
pub struct MetricsRow {
    pub effective_passes: f64,
    pub wall_seconds: f64,
    pub train_cost: f64,
    pub train_excess_cost: f64,
    pub test_cost: f64,
    pub test_error: f64,
}

impl MetricsRow {
    fn to_csv_line(self) -> String {
        format!(
            "{},{:.6},{},{},{},{}",
            self.effective_passes,
            self.wall_seconds,
            self.train_cost,
            self.train_excess_cost,
            self.test_cost,
            self.test_error
        )
    }
}

/// Parses experiment CSV text back into rows, verifying the schema.
pub fn check_csv_schema(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == CSV_HEADER => {}
        other => {
            return Err(Error::invalid(
                "csv",
                format!("bad header {other:?}, expected {CSV_HEADER:?}"),
            ))
        }
    }
    let mut rows = Vec::new();
    for (index, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: index + 2,
                    reason: format!("field {f:?} is not numeric"),
                })
            })
            .collect::<Result<_>>()?;
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: index + 2,
                reason: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        rows.push(MetricsRow {
            effective_passes: fields[0],
            wall_seconds: fields[1],
            train_cost: fields[2],
            train_excess_cost: fields[3],
            test_cost: fields[4],
            test_error: fields[5],
        });
    }
    Ok(rows)
}

/// Loads and splits the dataset, resolves the reference optimum, runs the
/// configured method, and writes the metric series to `out_path` as CSV.
/// Returns the rows that were written.
pub fn run_experiment(config: &RunConfig) -> Result<Vec<MetricsRow>> {
    run_experiment_with_cache(config, Some(default_cache_dir()).as_deref())
}

/// [`run_experiment`] with an explicit reference-cache directory.
pub fn run_experiment_with_cache(
    config: &RunConfig,
    cache_dir: Option<&Path>,
) -> Result<Vec<MetricsRow>> {
    let raw = load_dataset(&config.data_path)?;
    let (train, test) = split(
        &raw,
        &SplitSpec {
            train_fraction: config.split_fraction,
            shuffle_seed: config.split_seed,
        },
    )?;
    let population = train.num_examples();
    if population == 0 {
        return Err(Error::invalid(
            "split",
            "training split is empty; increase the fraction or dataset size",
        ));
    }
    let eta = config.eta.unwrap_or(1.0 / population as f64);
    let gradient_schedule = BatchSchedule::new(config.b1_mu, config.gamma_mu, population)?;
    let curvature_schedule = BatchSchedule::new(
        config.b1_sigma,
        config.gamma_sigma,
        config.cap_sigma.min(population),
    )?;
    let optimizer_config = SqbConfig::new(
        config.alpha,
        eta,
        gradient_schedule,
        curvature_schedule,
        config.solver_iters,
        config.passes,
        config.seed,
    )?;
    let (_, reference_cost) = cached_reference_optimum(&train, eta, cache_dir)?;
    let train_objective = Objective::new(&train, eta)?;
    let test_objective = Objective::new(&test, eta)?;
    let has_test = test.num_examples() > 0;
    let mut rows: Vec<MetricsRow> = Vec::new();
    run(config.method, &optimizer_config, &train, |point| {
        let train_cost = train_objective.value(point.theta)?;
        let (test_cost, test_error) = if has_test {
            (
                test_objective.value(point.theta)?,
                predict_error(&test, point.theta)?,
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        rows.push(MetricsRow {
            effective_passes: point.effective_passes,
            wall_seconds: point.elapsed_seconds,
            train_cost,
            train_excess_cost: train_cost - reference_cost,
            test_cost,
            test_error,
        });
        Ok(())
    })?;
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for row in &rows {
        text.push_str(&row.to_csv_line());
        text.push('\n');
    }
    if let Some(parent) = config.out_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&config.out_path, text)?;
    Ok(rows)
}
