//! Sorted sparse vectors.
//!
//! Feature vectors, per-example mean features, and bound factor columns are
//! all stored in this representation. Entries are kept sorted by index with
//! exact zeros dropped, so merges and dot products are linear scans.

use ndarray::Array1;

/// A sparse vector as a sorted list of `(index, value)` pairs.
///
/// Indices are `u32` (the dimension of every model in this crate fits
/// comfortably); values are `f64` and never exactly zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    entries: Vec<(u32, f64)>,
}

impl SparseVec {
    /// The zero vector.
    pub fn empty() -> Self {
        SparseVec {
            entries: Vec::new(),
        }
    }

    /// Builds from arbitrary pairs: sorts by index, sums duplicates, drops zeros.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        SparseVec { entries }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0.0)
            .map(|(i, &v)| (i as u32, v))
            .collect();
        SparseVec { entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().copied()
    }

    /// Largest stored index, if any entry exists.
    pub fn max_index(&self) -> Option<u32> {
        self.entries.last().map(|&(i, _)| i)
    }

    pub fn dot(&self, dense: &Array1<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(i, v)| v * dense[i as usize])
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    /// `out += scale * self`.
    pub fn add_scaled_to(&self, scale: f64, out: &mut Array1<f64>) {
        for &(i, v) in &self.entries {
            out[i as usize] += scale * v;
        }
    }

    pub fn to_dense(&self, dim: usize) -> Array1<f64> {
        let mut out = Array1::zeros(dim);
        self.add_scaled_to(1.0, &mut out);
        out
    }

    /// Merged linear combination `a*x + b*y`, dropping exact zeros.
    pub fn combine(a: f64, x: &SparseVec, b: f64, y: &SparseVec) -> SparseVec {
        let mut entries = Vec::with_capacity(x.nnz() + y.nnz());
        let mut xi = x.entries.iter().peekable();
        let mut yi = y.entries.iter().peekable();
        loop {
            let value = match (xi.peek(), yi.peek()) {
                (Some(&&(i, xv)), Some(&&(j, yv))) => {
                    if i < j {
                        xi.next();
                        (i, a * xv)
                    } else if j < i {
                        yi.next();
                        (j, b * yv)
                    } else {
                        xi.next();
                        yi.next();
                        (i, a * xv + b * yv)
                    }
                }
                (Some(&&(i, xv)), None) => {
                    xi.next();
                    (i, a * xv)
                }
                (None, Some(&&(j, yv))) => {
                    yi.next();
                    (j, b * yv)
                }
                (None, None) => break,
            };
            if value.1 != 0.0 {
                entries.push(value);
            }
        }
        SparseVec { entries }
    }

    /// `x - y`.
    pub fn sub(x: &SparseVec, y: &SparseVec) -> SparseVec {
        SparseVec::combine(1.0, x, -1.0, y)
    }
}
