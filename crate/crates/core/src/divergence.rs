//! Linear-kernel maximum mean discrepancy between the ensemble's
//! meta-representation and each base model's output.
//!
//! For one-hot codes every sum of inner products over all point pairs
//! factors through per-clustering centroid histograms:
//! `sum_{i,j} x_{u,i}^T x_{z,j} = sum_t sum_v hist_u[t][v] * hist_z[t][v]`,
//! so no `n x n` matrix is needed.

use serde::{Deserialize, Serialize};

use crate::data::{Embedding, SparseCode};
use crate::ensemble::MbnEnsemble;
use crate::error::{MbnError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdReport {
    pub v: Vec<f64>,
    pub v_min: f64,
    pub v_max: f64,
    pub w: Vec<f64>,
    /// True when the term shared by all models was left out, so `v` is an
    /// offset of the actual discrepancy.
    pub reduced: bool,
}

fn histograms(code: &SparseCode) -> Vec<Vec<u64>> {
    code.blocks().iter().map(|b| b.histograms()).collect()
}

fn hist_dot(a: &[Vec<u64>], b: &[Vec<u64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<u64>()).sum::<u64>() as f64
}

fn check_shapes(codes: &[&SparseCode]) -> Result<usize> {
    let first = codes.first().ok_or_else(|| MbnError::Config("MMD needs at least one model".into()))?;
    let n = first.n();
    if n < 2 {
        return Err(MbnError::InvalidDataset(format!("MMD needs n >= 2, got {n}")));
    }
    for (z, c) in codes.iter().enumerate() {
        let same = c.n() == n
            && c.num_blocks() == first.num_blocks()
            && c.blocks().iter().zip(first.blocks()).all(|(a, b)| a.v() == b.v() && a.k() == b.k());
        if !same {
            return Err(MbnError::Shape(format!("model {z} output shape differs from model 0")));
        }
    }
    Ok(n)
}

/// MMD score of each model code against the concatenation of all of them.
pub fn mmd_scores_codes(codes: &[&SparseCode], include_constant: bool) -> Result<Vec<f64>> {
    let n = check_shapes(codes)? as f64;
    let z_count = codes.len() as f64;
    let hists: Vec<Vec<Vec<u64>>> = codes.iter().map(|c| histograms(c)).collect();
    let units: Vec<f64> = codes.iter().map(|c| c.units() as f64).collect();

    // sum_{i,j} x_{u,i}^T x_{u,j}
    let self_sums: Vec<f64> = hists.iter().map(|h| hist_dot(h, h)).collect();
    // sum_{u} hist_u, per clustering and centroid
    let mut pooled = hists[0].clone();
    for h in &hists[1..] {
        for (p, b) in pooled.iter_mut().zip(h) {
            p.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    let off_diag = n * (n - 1.0);
    let constant = if include_constant {
        let meta_off = self_sums.iter().sum::<f64>() - n * units.iter().sum::<f64>();
        meta_off / (z_count * off_diag)
    } else {
        0.0
    };
    Ok(hists
        .iter()
        .enumerate()
        .map(|(z, h)| {
            let within = (self_sums[z] - n * units[z]) / off_diag;
            let cross = 2.0 / z_count * hist_dot(&pooled, h) / (n * n);
            constant + within - cross
        })
        .collect())
}

pub fn mmd_scores(ens: &MbnEnsemble, include_constant: bool) -> Result<Vec<f64>> {
    let codes: Vec<&SparseCode> = ens.models.iter().map(|m| &m.output_code).collect();
    mmd_scores_codes(&codes, include_constant)
}

/// Min-max flip: the smallest discrepancy gets weight 1, the largest 0.
/// All weights are 1 when every score is equal.
pub fn mmd_weights(v: &[f64]) -> Vec<f64> {
    let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let v_max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = v_max - v_min;
    if !(range > 0.0) || !range.is_finite() {
        return vec![1.0; v.len()];
    }
    v.iter().map(|x| 1.0 - (x - v_min) / range).collect()
}

pub fn report_from_scores(v: Vec<f64>, reduced: bool) -> MmdReport {
    let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let v_max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w = mmd_weights(&v);
    MmdReport { v, v_min, v_max, w, reduced }
}

pub fn mmd_report(ens: &MbnEnsemble, include_constant: bool) -> Result<MmdReport> {
    Ok(report_from_scores(mmd_scores(ens, include_constant)?, !include_constant))
}

/// The same estimator applied to dense embeddings: `reference` plays the
/// role of the meta-representation and each entry of `parts` one model.
/// Narrower embeddings are zero-padded.
pub fn mmd_scores_embedded(reference: &Embedding, parts: &[Embedding]) -> Result<Vec<f64>> {
    let n = reference.n();
    if n < 2 {
        return Err(MbnError::InvalidDataset(format!("MMD needs n >= 2, got {n}")));
    }
    let sum_and_sq = |e: &Embedding| -> (Vec<f64>, f64) {
        let mut s = vec![0.0; e.dim()];
        let mut sq = 0.0;
        for i in 0..e.n() {
            for (a, v) in s.iter_mut().zip(e.row(i)) {
                *a += v;
                sq += v * v;
            }
        }
        (s, sq)
    };
    let padded_dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let nf = n as f64;
    let off_diag = nf * (nf - 1.0);
    let (ref_sum, ref_sq) = sum_and_sq(reference);
    let ref_term = (padded_dot(&ref_sum, &ref_sum) - ref_sq) / off_diag;
    parts
        .iter()
        .map(|e| {
            if e.n() != n {
                return Err(MbnError::DimensionMismatch { expected: n, got: e.n() });
            }
            let (s, sq) = sum_and_sq(e);
            let within = (padded_dot(&s, &s) - sq) / off_diag;
            Ok(ref_term + within - 2.0 * padded_dot(&ref_sum, &s) / (nf * nf))
        })
        .collect()
}
