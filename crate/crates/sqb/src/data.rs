//! LIBSVM-format dataset ingestion and train/test splitting.
//!
//! Lines look like `label idx:val idx:val ...` with 1-based feature indices.
//! Labels may come from any of the alphabets `{-1,+1}`, `{0,1}` or `{1,2}`;
//! they are mapped onto `{0,1}` once the whole file has been read. Files
//! ending in `.gz` are transparently decompressed. No feature scaling is
//! applied.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::LogisticInstance;
use crate::sparse::SparseVec;

/// Parsed dataset before label normalization commits it to a model.
#[derive(Debug, Clone)]
pub struct RawDataset {
    /// Per-row binary label and 0-based sparse features.
    pub rows: Vec<(u8, SparseVec)>,
    /// Dimension override; when absent the dimension is one past the largest
    /// observed feature index.
    pub declared_dim: Option<usize>,
}

impl RawDataset {
    pub fn num_examples(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        let observed = self
            .rows
            .iter()
            .filter_map(|(_, row)| row.max_index())
            .max()
            .map_or(0, |max| max as usize + 1);
        match self.declared_dim {
            Some(declared) => declared.max(observed),
            None => observed,
        }
    }

    pub fn to_instance(&self) -> Result<LogisticInstance> {
        let dim = self.dim();
        let rows = self.rows.iter().map(|(_, row)| row.clone()).collect();
        let labels = self.rows.iter().map(|(label, _)| *label).collect();
        LogisticInstance::new(rows, labels, dim)
    }
}

fn parse_label(token: &str, line: usize) -> Result<i8> {
    let value: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        reason: format!("label {token:?} is not numeric"),
    })?;
    if value.fract() != 0.0 || !(-1.0..=2.0).contains(&value) {
        return Err(Error::Parse {
            line,
            reason: format!("label {token:?} is not in {{-1, 0, 1, 2}}"),
        });
    }
    Ok(value as i8)
}

fn map_labels(raw: &[i8]) -> Result<Vec<u8>> {
    let has = |v: i8| raw.contains(&v);
    let mapping: fn(i8) -> Option<u8> = if has(-1) {
        |v| match v {
            -1 => Some(0),
            1 => Some(1),
            _ => None,
        }
    } else if has(0) {
        |v| match v {
            0 => Some(0),
            1 => Some(1),
            _ => None,
        }
    } else if has(2) {
        |v| match v {
            1 => Some(0),
            2 => Some(1),
            _ => None,
        }
    } else {
        // Only the label 1 appears; treat it as the positive class.
        |v| (v == 1).then_some(1)
    };
    raw.iter()
        .enumerate()
        .map(|(i, &v)| {
            mapping(v).ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: format!("label {v} is inconsistent with the file's label alphabet"),
            })
        })
        .collect()
}

/// Parses LIBSVM text. Feature indices are converted to 0-based; lines with
/// non-increasing indices are accepted with a logged warning, and duplicate
/// indices within a line sum.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<RawDataset> {
    let mut raw_labels = Vec::new();
    let mut feature_rows = Vec::new();
    for (line_index, line) in reader.lines().enumerate() {
        let line_number = line_index + 1;
        let line = line?;
        let mut tokens = line.split_whitespace();
        let Some(label_token) = tokens.next() else {
            continue;
        };
        raw_labels.push(parse_label(label_token, line_number)?);
        let mut pairs = Vec::new();
        let mut previous_index = 0u32;
        let mut ordered = true;
        for token in tokens {
            let (index_part, value_part) = token.split_once(':').ok_or_else(|| Error::Parse {
                line: line_number,
                reason: format!("feature {token:?} is not of the form index:value"),
            })?;
            let index: u32 = index_part.parse().map_err(|_| Error::Parse {
                line: line_number,
                reason: format!("feature index {index_part:?} is not an integer"),
            })?;
            if index == 0 {
                return Err(Error::Parse {
                    line: line_number,
                    reason: "feature indices are 1-based; found index 0".to_string(),
                });
            }
            let value: f64 = value_part.parse().map_err(|_| Error::Parse {
                line: line_number,
                reason: format!("feature value {value_part:?} is not numeric"),
            })?;
            if index <= previous_index {
                ordered = false;
            }
            previous_index = index;
            pairs.push((index - 1, value));
        }
        if !ordered {
            log::warn!("line {line_number}: feature indices are not strictly increasing");
        }
        feature_rows.push(SparseVec::from_pairs(pairs));
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = map_labels(&raw_labels)?;
    Ok(RawDataset {
        rows: labels.into_iter().zip(feature_rows).collect(),
        declared_dim: None,
    })
}

/// Reads a dataset from disk, decompressing when the path ends in `.gz`.
pub fn load_dataset(path: &Path) -> Result<RawDataset> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|ext| ext == "gz") {
        parse_libsvm(BufReader::new(GzDecoder::new(file)))
    } else {
        parse_libsvm(BufReader::new(file))
    }
}

/// Writes rows in LIBSVM text form with labels `0`/`1` and 1-based indices.
/// Values print in shortest round-trip decimal form, so write-then-parse
/// reproduces them exactly.
pub fn write_libsvm<W: Write>(dataset: &RawDataset, writer: &mut W) -> Result<()> {
    for (label, row) in &dataset.rows {
        write!(writer, "{label}")?;
        for (index, value) in row.iter() {
            write!(writer, " {}:{}", index + 1, value)?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

/// Train/test partition rule: seeded shuffle, then a prefix of
/// `floor(train_fraction * T)` rows for training.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub shuffle_seed: u64,
}

/// Splits into train and test instances sharing the full dataset's
/// dimension. A fraction of 1 yields an empty test set.
pub fn split(dataset: &RawDataset, spec: &SplitSpec) -> Result<(LogisticInstance, LogisticInstance)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0) {
        return Err(Error::invalid(
            "train_fraction",
            format!("{} (must be in (0, 1])", spec.train_fraction),
        ));
    }
    if dataset.rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let count = dataset.rows.len();
    let dim = dataset.dim();
    let mut order: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.shuffle_seed);
    order.shuffle(&mut rng);
    let train_count = (spec.train_fraction * count as f64).floor() as usize;
    let build = |indices: &[usize]| -> Result<LogisticInstance> {
        let rows = indices.iter().map(|&i| dataset.rows[i].1.clone()).collect();
        let labels = indices.iter().map(|&i| dataset.rows[i].0).collect();
        LogisticInstance::new(rows, labels, dim)
    };
    Ok((build(&order[..train_count])?, build(&order[train_count..])?))
}
