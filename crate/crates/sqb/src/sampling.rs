//! Mini-batch sizing and drawing.
//!
//! Batch sizes follow a linear growth schedule with a cap. Draws are uniform
//! without replacement, and the gradient and curvature batches of the same
//! iteration come from separate counter-based RNG streams so they are
//! mutually independent while the whole run stays reproducible from one seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Stream tag for gradient-batch draws.
const GRADIENT_STREAM: u64 = 1;
/// Stream tag for curvature-batch draws.
const CURVATURE_STREAM: u64 = 2;
/// Stream tag for single-example picks (stochastic-gradient baselines).
const PICK_STREAM: u64 = 3;

/// Effectively uncapped schedule limit.
pub const UNCAPPED: usize = usize::MAX;

/// Linear batch-size schedule `size_at(k) = min(cap, b1 + round((k-1) gamma))`
/// with rounding half away from zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSchedule {
    b1: usize,
    gamma: f64,
    cap: usize,
}

impl BatchSchedule {
    pub fn new(b1: usize, gamma: f64, cap: usize) -> Result<Self> {
        if b1 < 1 {
            return Err(Error::invalid("b1", "0 (must be >= 1)"));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::invalid("gamma", format!("{gamma} (must be >= 0)")));
        }
        if cap < 1 {
            return Err(Error::invalid("cap", "0 (must be >= 1)"));
        }
        Ok(BatchSchedule { b1, gamma, cap })
    }

    /// Constant-size schedule.
    pub fn fixed(size: usize) -> Result<Self> {
        BatchSchedule::new(size, 0.0, size)
    }

    pub fn size_at(&self, k: u64) -> Result<usize> {
        if k < 1 {
            return Err(Error::invalid("k", "0 (iterations are 1-based)"));
        }
        let grown = self.b1 as f64 + ((k - 1) as f64 * self.gamma).round();
        if grown >= self.cap as f64 {
            Ok(self.cap)
        } else {
            Ok(grown as usize)
        }
    }
}

/// RNG for a named `(purpose, iteration)` stream of a seeded run.
fn stream_rng(seed: u64, purpose: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 48) | (iteration & 0xffff_ffff_ffff));
    rng
}

/// Draws a uniform size-`size` subset of `0..population` without replacement.
///
/// A requested size above the population is clamped to a full batch with a
/// logged note; a size of zero is an error.
pub fn draw(rng: &mut impl Rng, population: usize, size: usize) -> Result<Vec<usize>> {
    if population == 0 {
        return Err(Error::invalid("population", "0 (nothing to sample)"));
    }
    if size < 1 {
        return Err(Error::invalid("size", "0 (must be >= 1)"));
    }
    let effective = if size > population {
        log::warn!("batch size {size} exceeds population {population}; clamped to full batch");
        population
    } else {
        size
    };
    Ok(rand::seq::index::sample(rng, population, effective).into_vec())
}

/// The two independent batches used by one optimizer iteration.
#[derive(Debug, Clone)]
pub struct BatchDraw {
    pub gradient_batch: Vec<usize>,
    pub curvature_batch: Vec<usize>,
}

/// Draws the gradient and curvature batches for iteration `k` of a seeded
/// run. The two draws use disjoint RNG streams keyed by `(purpose, k)`, so
/// they are independent of each other and of every other iteration.
pub fn draw_pair(
    seed: u64,
    iteration: u64,
    population: usize,
    gradient_size: usize,
    curvature_size: usize,
) -> Result<BatchDraw> {
    let mut grad_rng = stream_rng(seed, GRADIENT_STREAM, iteration);
    let mut curv_rng = stream_rng(seed, CURVATURE_STREAM, iteration);
    Ok(BatchDraw {
        gradient_batch: draw(&mut grad_rng, population, gradient_size)?,
        curvature_batch: draw(&mut curv_rng, population, curvature_size)?,
    })
}

/// Uniform single-example pick for the stochastic-gradient baselines,
/// deterministic in `(seed, iteration)`.
pub fn pick_example(seed: u64, iteration: u64, population: usize) -> Result<usize> {
    if population == 0 {
        return Err(Error::invalid("population", "0 (nothing to sample)"));
    }
    Ok(stream_rng(seed, PICK_STREAM, iteration).gen_range(0..population))
}
