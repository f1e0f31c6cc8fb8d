use serde::{Deserialize, Serialize};

use super::hungarian::min_cost_assignment;
use crate::data::LabelVector;
use crate::error::{MbnError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccReport {
    pub acc: f64,
    /// `mapping[predicted] = truth`, over `max(c_pred, c_true)` labels.
    pub mapping: Vec<usize>,
    /// `confusion[predicted][truth]`, zero-padded to square.
    pub confusion: Vec<Vec<usize>>,
}

/// Clustering accuracy under the best one-to-one relabeling of `pred`.
pub fn accuracy(pred: &LabelVector, truth: &LabelVector) -> Result<AccReport> {
    if pred.len() != truth.len() {
        return Err(MbnError::DimensionMismatch { expected: truth.len(), got: pred.len() });
    }
    let m = pred.num_clusters().max(truth.num_clusters());
    let mut confusion = vec![vec![0usize; m]; m];
    for (&p, &t) in pred.as_slice().iter().zip(truth.as_slice()) {
        confusion[p][t] += 1;
    }
    let top = confusion.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost: Vec<Vec<i64>> = confusion.iter().map(|r| r.iter().map(|&x| top - x as i64).collect()).collect();
    let mapping = min_cost_assignment(&cost);
    let matched: usize = mapping.iter().enumerate().map(|(p, &t)| confusion[p][t]).sum();
    let acc = if pred.is_empty() { 1.0 } else { matched as f64 / pred.len() as f64 };
    Ok(AccReport { acc, mapping, confusion })
}
