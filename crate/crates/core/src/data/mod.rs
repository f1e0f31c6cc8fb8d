//! Core data types, ingestion and serialization.

mod blobs;
mod code;
mod container;
mod csv;

pub use blobs::{make_blobs, BlobsSpec};
pub use code::{CodeBlock, SparseCode};
pub(crate) use container::write_atomic;
pub use container::{code_from_json, code_to_json, load_code, load_json, save_code, save_json};
pub use csv::{load_csv, write_csv, CsvOptions};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{MbnError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl std::str::FromStr for Metric {
    type Err = MbnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(MbnError::Config(format!("unknown metric '{other}'"))),
        }
    }
}

/// Hard cluster or class assignment of `n` points into `c` groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    c: usize,
}

impl LabelVector {
    /// Labels must already lie in `[0, c)`.
    pub fn new(labels: Vec<usize>, c: usize) -> Result<Self> {
        if c == 0 {
            return Err(MbnError::InvalidDataset("label vector needs c >= 1".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= c) {
            return Err(MbnError::InvalidDataset(format!("label {bad} outside [0, {c})")));
        }
        Ok(LabelVector { labels, c })
    }

    /// Re-indexes arbitrary integer labels onto `0..c` in ascending order of
    /// the original values.
    pub fn from_raw<T: Ord + Clone>(raw: &[T]) -> Self {
        let mut index = BTreeMap::new();
        for v in raw {
            index.entry(v.clone()).or_insert(0usize);
        }
        for (i, slot) in index.values_mut().enumerate() {
            *slot = i;
        }
        let labels = raw.iter().map(|v| index[v]).collect();
        LabelVector { labels, c: index.len().max(1) }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.c
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.c];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// A feature matrix with optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Option<LabelVector>,
    pub metric: Metric,
    pub name: String,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Option<LabelVector>, metric: Metric, name: impl Into<String>) -> Result<Self> {
        if features.rows() < 2 {
            return Err(MbnError::InvalidDataset(format!("need at least 2 points, got {}", features.rows())));
        }
        if features.cols() < 1 {
            return Err(MbnError::InvalidDataset("need at least one feature".into()));
        }
        if let Some(pos) = features.as_slice().iter().position(|x| !x.is_finite()) {
            return Err(MbnError::InvalidDataset(format!(
                "non-finite value at row {}, column {}",
                pos / features.cols() + 1,
                pos % features.cols() + 1
            )));
        }
        let labels = match labels {
            Some(l) => {
                if l.len() != features.rows() {
                    return Err(MbnError::DimensionMismatch { expected: features.rows(), got: l.len() });
                }
                // Collapse unused label values so the range is contiguous.
                Some(LabelVector::from_raw(l.as_slice()))
            }
            None => None,
        };
        Ok(Dataset { features, labels, metric, name: name.into() })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(LabelVector::num_clusters)
    }
}

/// Low-dimensional real representation of the points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Matrix,
}

impl Embedding {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.cols() < 1 {
            return Err(MbnError::InvalidDataset("embedding needs h >= 1".into()));
        }
        if values.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(MbnError::InvalidDataset("embedding has non-finite entries".into()));
        }
        Ok(Embedding { values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }
}
