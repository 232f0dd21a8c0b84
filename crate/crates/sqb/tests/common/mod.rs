#![allow(dead_code)]
//! Shared oracles for the integration suites: independent dense linear
//! algebra, finite differences, and randomized model generators. Everything
//! here is deliberately brute-force so it cannot share a bug with the
//! library code it checks.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sqb::bound::BoundFactors;
use sqb::model::LogLinearModel;
use sqb::model::LogisticInstance;
use sqb::sparse::SparseVec;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// General finite-outcome model with explicit per-outcome features and
/// measures, used where logistic regression is too special.
#[derive(Debug, Clone)]
pub struct SyntheticModel {
    pub features: Vec<Vec<SparseVec>>,
    pub measures: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub dim: usize,
}

impl LogLinearModel for SyntheticModel {
    fn num_examples(&self) -> usize {
        self.features.len()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn outcome_count(&self, example: usize) -> usize {
        self.features[example].len()
    }
    fn feature(&self, example: usize, outcome: usize) -> &SparseVec {
        &self.features[example][outcome]
    }
    fn measure(&self, example: usize, outcome: usize) -> f64 {
        self.measures[example][outcome]
    }
    fn observed_label(&self, example: usize) -> usize {
        self.labels[example]
    }
}

/// Random finite-outcome model: feature entries in [-3, 3], measures in
/// [0.2, 2], outcome counts in 2..=max_outcomes.
pub fn random_synthetic(
    rng: &mut ChaCha8Rng,
    num_examples: usize,
    dim: usize,
    max_outcomes: usize,
) -> SyntheticModel {
    let mut features = Vec::with_capacity(num_examples);
    let mut measures = Vec::with_capacity(num_examples);
    let mut labels = Vec::with_capacity(num_examples);
    for _ in 0..num_examples {
        let outcomes = rng.gen_range(2..=max_outcomes.max(2));
        let mut fs = Vec::with_capacity(outcomes);
        let mut hs = Vec::with_capacity(outcomes);
        for _ in 0..outcomes {
            let dense: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
            fs.push(SparseVec::from_dense(&dense));
            hs.push(rng.gen_range(0.2..2.0));
        }
        labels.push(rng.gen_range(0..outcomes));
        features.push(fs);
        measures.push(hs);
    }
    SyntheticModel {
        features,
        measures,
        labels,
        dim,
    }
}

/// The same model with each example's outcomes visited in reverse order.
#[derive(Debug, Clone)]
pub struct ReversedOutcomes<M> {
    pub inner: M,
}

impl<M: LogLinearModel> LogLinearModel for ReversedOutcomes<M> {
    fn num_examples(&self) -> usize {
        self.inner.num_examples()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn outcome_count(&self, example: usize) -> usize {
        self.inner.outcome_count(example)
    }
    fn feature(&self, example: usize, outcome: usize) -> &SparseVec {
        let last = self.inner.outcome_count(example) - 1;
        self.inner.feature(example, last - outcome)
    }
    fn measure(&self, example: usize, outcome: usize) -> f64 {
        let last = self.inner.outcome_count(example) - 1;
        self.inner.measure(example, last - outcome)
    }
    fn observed_label(&self, example: usize) -> usize {
        let last = self.inner.outcome_count(example) - 1;
        last - self.inner.observed_label(example)
    }
}

/// Random dense parameter vector with entries in [-bound, bound].
pub fn random_theta(rng: &mut ChaCha8Rng, dim: usize, bound: f64) -> Array1<f64> {
    Array1::from_iter((0..dim).map(|_| rng.gen_range(-bound..bound)))
}

/// Random logistic instance with dense rows in [-1, 1] and labels sampled
/// from a hidden parameter vector, so logits stay moderate.
pub fn random_logistic(rng: &mut ChaCha8Rng, num_examples: usize, dim: usize) -> LogisticInstance {
    let hidden = random_theta(rng, dim, 1.0);
    let mut rows = Vec::with_capacity(num_examples);
    let mut labels = Vec::with_capacity(num_examples);
    for _ in 0..num_examples {
        let dense: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let row = SparseVec::from_dense(&dense);
        let logit = row.dot(&hidden);
        let p = 1.0 / (1.0 + (-logit).exp());
        labels.push(u8::from(rng.gen_bool(p)));
        rows.push(row);
    }
    LogisticInstance::new(rows, labels, dim).unwrap()
}

/// Sparse one-hot instance shaped like census-income data: 123 binary
/// columns in 14 groups, one active column per group, labels from a hidden
/// parameter vector with a negative bias giving roughly one positive in four.
pub fn adult_shaped(num_examples: usize, seed: u64) -> LogisticInstance {
    const DIM: usize = 123;
    const GROUPS: usize = 14;
    let mut generator = rng(seed);
    let mut boundaries = vec![0usize];
    for g in 1..GROUPS {
        boundaries.push(g * DIM / GROUPS);
    }
    boundaries.push(DIM);
    let hidden = random_theta(&mut generator, DIM, 0.8);
    let bias = -1.3;
    let mut rows = Vec::with_capacity(num_examples);
    let mut labels = Vec::with_capacity(num_examples);
    for _ in 0..num_examples {
        let mut pairs = Vec::with_capacity(GROUPS);
        for g in 0..GROUPS {
            let index = generator.gen_range(boundaries[g]..boundaries[g + 1]);
            pairs.push((index as u32, 1.0));
        }
        let row = SparseVec::from_pairs(pairs);
        let logit = row.dot(&hidden) + bias;
        let p = 1.0 / (1.0 + (-logit).exp());
        labels.push(u8::from(generator.gen_bool(p)));
        rows.push(row);
    }
    LogisticInstance::new(rows, labels, DIM).unwrap()
}

/// Central finite differences of a scalar function.
pub fn central_difference_gradient<F: FnMut(&Array1<f64>) -> f64>(
    mut f: F,
    theta: &Array1<f64>,
    step: f64,
) -> Array1<f64> {
    let mut grad = Array1::zeros(theta.len());
    let mut probe = theta.clone();
    for i in 0..theta.len() {
        probe[i] = theta[i] + step;
        let plus = f(&probe);
        probe[i] = theta[i] - step;
        let minus = f(&probe);
        probe[i] = theta[i];
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Central finite differences of a vector function, returned column-wise:
/// `out[(i, j)] = d f_i / d theta_j`.
pub fn central_difference_jacobian<F: FnMut(&Array1<f64>) -> Array1<f64>>(
    mut f: F,
    theta: &Array1<f64>,
    step: f64,
) -> Array2<f64> {
    let dim_out = f(theta).len();
    let mut jac = Array2::zeros((dim_out, theta.len()));
    let mut probe = theta.clone();
    for j in 0..theta.len() {
        probe[j] = theta[j] + step;
        let plus = f(&probe);
        probe[j] = theta[j] - step;
        let minus = f(&probe);
        probe[j] = theta[j];
        for i in 0..dim_out {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    jac
}

/// Dense reconstruction `sum_k w_k l_k l_k'` of factored curvature.
pub fn reconstruct_curvature(factors: &BoundFactors) -> Array2<f64> {
    let dim = factors.dim();
    let mut matrix = Array2::zeros((dim, dim));
    for (col, &w) in factors.columns().iter().zip(factors.weights()) {
        let dense = col.to_dense(dim);
        for a in 0..dim {
            let wa = w * dense[a];
            if wa != 0.0 {
                for b in 0..dim {
                    matrix[(a, b)] += wa * dense[b];
                }
            }
        }
    }
    matrix
}

/// Dense per-example feature covariance at `theta` (an independent route to
/// the model Hessian's data term).
pub fn example_covariance<M: LogLinearModel + ?Sized>(
    model: &M,
    example: usize,
    theta: &Array1<f64>,
) -> Array2<f64> {
    let dim = model.dim();
    let count = model.outcome_count(example);
    let mut weights = Vec::with_capacity(count);
    let mut max_log = f64::NEG_INFINITY;
    for y in 0..count {
        let h = model.measure(example, y);
        let log_w = if h > 0.0 {
            h.ln() + model.feature(example, y).dot(theta)
        } else {
            f64::NEG_INFINITY
        };
        max_log = max_log.max(log_w);
        weights.push(log_w);
    }
    let mut probs: Vec<f64> = weights.iter().map(|&w| (w - max_log).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    let mut mean = Array1::zeros(dim);
    for y in 0..count {
        model.feature(example, y).add_scaled_to(probs[y], &mut mean);
    }
    let mut cov = Array2::zeros((dim, dim));
    for y in 0..count {
        let centered = model.feature(example, y).to_dense(dim) - &mean;
        for a in 0..dim {
            let ca = probs[y] * centered[a];
            if ca != 0.0 {
                for b in 0..dim {
                    cov[(a, b)] += ca * centered[b];
                }
            }
        }
    }
    cov
}

/// Cholesky solve of a symmetric positive definite dense system.
pub fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                assert!(sum > 0.0, "matrix is not positive definite at pivot {i}");
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[(i, k)] * y[k];
        }
        y[i] = sum / l[(i, i)];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[(k, i)] * x[k];
        }
        x[i] = sum / l[(i, i)];
    }
    x
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let scale = m.iter().map(|v| v.abs()).fold(0.0f64, f64::max).max(1.0);
    for _ in 0..200 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(m[(p, q)].abs());
            }
        }
        if off < 1e-13 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let phi = 0.5 * (2.0 * apq).atan2(aqq - app);
                let (s, c) = phi.sin_cos();
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

/// Norm of the component of `target` outside the span of `columns`, via
/// modified Gram-Schmidt with re-orthogonalization.
pub fn projection_residual_norm(columns: &[SparseVec], dim: usize, target: &Array1<f64>) -> f64 {
    let mut basis: Vec<Array1<f64>> = Vec::new();
    for col in columns {
        let mut v = col.to_dense(dim);
        let original = norm(&v);
        if original == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let coeff = q.dot(&v);
                v.scaled_add(-coeff, q);
            }
        }
        let remaining = norm(&v);
        if remaining > 1e-12 * original {
            basis.push(&v / remaining);
        }
    }
    let mut residual = target.clone();
    for _ in 0..2 {
        for q in &basis {
            let coeff = q.dot(&residual);
            residual.scaled_add(-coeff, q);
        }
    }
    norm(&residual)
}

/// Coefficient of determination of the least-squares line through
/// `(xs, ys)`.
pub fn linear_fit_r2(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if syy == 0.0 {
        return 1.0;
    }
    let slope = sxy / sxx;
    let mut ss_res = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let fit = mean_y + slope * (x - mean_x);
        ss_res += (y - fit) * (y - fit);
    }
    1.0 - ss_res / syy
}
