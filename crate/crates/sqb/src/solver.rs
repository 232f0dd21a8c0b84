//! Matrix-free application and truncated iterative solution of the
//! regularized curvature system `(Sigma + eta I) xi = b`.
//!
//! `Sigma` stays in factored form, so one operator application costs
//! O(d + total factor nonzeros). The solver is conjugate-gradient
//! least-squares (CGLS) started from zero and truncated after a fixed number
//! of iterations; truncation is part of the method's regularization, so there
//! is no adaptive tolerance, only an exact-convergence cutoff and a breakdown
//! guard.
//!
//! CGLS minimizes the residual 2-norm over the Krylov space built from the
//! squared operator, so every iterate lies in the operator's range. That
//! matters here: the gradient and curvature batches are sampled
//! independently, so the right-hand side routinely has components outside the
//! span of the curvature factors. Those components sit on the eigenvalue
//! `eta` of the regularized operator, and a solver optimal in the operator
//! norm would chase them with weight `1/eta`, turning sampling noise into
//! steps of magnitude `|b|/eta`. The residual-norm objective weights the same
//! components by `eta^2`, so a truncated solve leaves them essentially
//! untouched.

use ndarray::Array1;

use crate::bound::BoundFactors;
use crate::error::{Error, Result};

/// Residual threshold, relative to the right-hand side norm, below which the
/// solve stops early: the iterate is already exact to machine precision.
const EXACT_RESIDUAL_RELATIVE: f64 = 1e-14;

/// The linear operator `x -> (sum_k w_k l_k l_k' + eta I) x`.
pub struct CurvatureOperator<'a> {
    factors: &'a BoundFactors,
    eta: f64,
}

/// Outcome of a truncated solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Array1<f64>,
    pub iterations_run: usize,
    pub final_residual_norm: f64,
}

impl<'a> CurvatureOperator<'a> {
    pub fn new(factors: &'a BoundFactors, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::invalid("eta", format!("{eta} (must be >= 0)")));
        }
        Ok(CurvatureOperator { factors, eta })
    }

    pub fn dim(&self) -> usize {
        self.factors.dim()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `(Sigma + eta I) x` without forming `Sigma`.
    pub fn apply(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.factors.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.factors.dim(),
                actual: x.len(),
            });
        }
        let mut out = x.mapv(|v| self.eta * v);
        self.factors.apply_into(x, &mut out);
        Ok(out)
    }

    /// CGLS iterations from the zero vector, truncated after `max_iters`
    /// steps.
    ///
    /// Each iterate minimizes the residual 2-norm over a growing Krylov space
    /// and stays in the operator's range, so with `eta = 0` a consistent
    /// singular system converges to its minimum-norm solution while
    /// out-of-range right-hand-side components are never inverted. Stops
    /// early only when the residual falls below machine-precision scale or
    /// the least-squares gradient vanishes (breakdown: the remaining residual
    /// is orthogonal to the range). Rounding spoils exact finite termination
    /// for Krylov methods, so budgets beyond the dimension still help and are
    /// honored rather than clipped.
    pub fn solve(&self, b: &Array1<f64>, max_iters: usize) -> Result<SolveReport> {
        if b.len() != self.factors.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.factors.dim(),
                actual: b.len(),
            });
        }
        if max_iters == 0 {
            return Err(Error::invalid("max_iters", "0 (must be >= 1)"));
        }
        let cap = max_iters;
        let threshold = EXACT_RESIDUAL_RELATIVE * b.dot(b).sqrt();
        let mut x = Array1::zeros(b.len());
        let mut residual = b.clone();
        let mut normal_residual = self.apply(&residual)?;
        let mut gamma = normal_residual.dot(&normal_residual);
        let mut direction = normal_residual.clone();
        let mut iterations_run = 0;
        for _ in 0..cap {
            if gamma == 0.0 || residual.dot(&residual).sqrt() < threshold {
                break;
            }
            let ad = self.apply(&direction)?;
            let curvature = ad.dot(&ad);
            if curvature <= 0.0 {
                break;
            }
            let step = gamma / curvature;
            x.scaled_add(step, &direction);
            residual.scaled_add(-step, &ad);
            iterations_run += 1;
            normal_residual = self.apply(&residual)?;
            let gamma_next = normal_residual.dot(&normal_residual);
            let ratio = gamma_next / gamma;
            direction.mapv_inplace(|d| ratio * d);
            direction += &normal_residual;
            gamma = gamma_next;
        }
        Ok(SolveReport {
            solution: x,
            iterations_run,
            final_residual_norm: residual.dot(&residual).sqrt(),
        })
    }
}
