//! Principal component analysis for dense features and for sparse codes.
//!
//! Sparse codes are reduced through the centered `n x n` match-count Gram
//! matrix whenever their implicit dimension exceeds `n`; the principal
//! coordinates obtained that way coincide with dense PCA scores.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{Embedding, SparseCode};
use crate::error::{MbnError, Result};
use crate::matrix::Matrix;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Default reduced dimension: `min(100, n - 1)`.
pub fn default_dim(n: usize) -> usize {
    100.min(n.saturating_sub(1)).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `h x d`, rows are orthonormal principal axes.
    pub components: Matrix,
    /// Variances along each axis (denominator `n - 1`), nonincreasing.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.components.rows()
    }
}

fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Eigenpairs of a symmetric matrix, sorted by decreasing eigenvalue.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn effective_rank(values: &[f64]) -> usize {
    let top = values.first().copied().unwrap_or(0.0);
    values.iter().take_while(|&&v| v > RANK_TOLERANCE * top).count()
}

/// Flips `v` so that its largest-magnitude entry is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn pca_fit(x: &Matrix, target_dim: usize) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(MbnError::InvalidDataset(format!("PCA needs n >= 2, got {n}")));
    }
    if target_dim == 0 {
        return Err(MbnError::Config("PCA target dimension must be >= 1".into()));
    }
    let mean = x.column_means();
    let mut centered = x.clone();
    for i in 0..n {
        centered.row_mut(i).iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
    }
    let raw_scale = x.as_slice().iter().map(|v| v * v).sum::<f64>() / n as f64;
    let xc = to_dmatrix(&centered);
    let denom = (n - 1) as f64;

    let (eigenvalues, axes): (Vec<f64>, Vec<Vec<f64>>) = if d <= n {
        let (values, vectors) = sorted_eigen(xc.tr_mul(&xc) / denom);
        let axes = (0..values.len()).map(|j| vectors.column(j).iter().copied().collect()).collect();
        (values, axes)
    } else {
        let (values, vectors) = sorted_eigen(&xc * xc.transpose());
        let axes = values
            .iter()
            .enumerate()
            .map(|(j, &mu)| {
                let u = vectors.column(j);
                let mut axis: Vec<f64> = (xc.transpose() * u).iter().copied().collect();
                let norm = mu.max(0.0).sqrt();
                if norm > 0.0 {
                    axis.iter_mut().for_each(|a| *a /= norm);
                }
                axis
            })
            .collect();
        (values.iter().map(|mu| mu / denom).collect(), axes)
    };

    let top = eigenvalues.first().copied().unwrap_or(0.0);
    if top <= 1e2 * f64::EPSILON * f64::EPSILON * raw_scale.max(f64::MIN_POSITIVE) {
        return Err(MbnError::ZeroVariance("all rows are identical".into()));
    }
    let h = target_dim.min(effective_rank(&eigenvalues)).min(n - 1).min(d);
    let mut components = Matrix::zeros(h, d);
    for (j, axis) in axes.into_iter().take(h).enumerate() {
        let row = components.row_mut(j);
        row.copy_from_slice(&axis);
        fix_sign(row);
    }
    Ok(PcaModel { mean, components, eigenvalues: eigenvalues[..h].iter().map(|v| v.max(0.0)).collect() })
}

pub fn pca_transform(model: &PcaModel, x: &Matrix) -> Result<Embedding> {
    let d = model.mean.len();
    if x.cols() != d {
        return Err(MbnError::DimensionMismatch { expected: d, got: x.cols() });
    }
    let h = model.dim();
    let mut out = Matrix::zeros(x.rows(), h);
    let mut centered = vec![0.0; d];
    for i in 0..x.rows() {
        centered.iter_mut().zip(x.row(i)).zip(&model.mean).for_each(|((c, v), m)| *c = v - m);
        let row = out.row_mut(i);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = crate::matrix::dot(&centered, model.components.row(j));
        }
    }
    Embedding::new(out)
}

/// Principal coordinates from an uncentered `n x n` linear kernel.
/// Returns the embedding and the kernel eigenvalues it kept.
pub fn gram_embedding(kernel: &[f64], n: usize, target_dim: usize) -> Result<(Embedding, Vec<f64>)> {
    if n < 2 {
        return Err(MbnError::InvalidDataset(format!("PCA needs n >= 2, got {n}")));
    }
    if kernel.len() != n * n {
        return Err(MbnError::DimensionMismatch { expected: n * n, got: kernel.len() });
    }
    if target_dim == 0 {
        return Err(MbnError::Config("PCA target dimension must be >= 1".into()));
    }
    let row_means: Vec<f64> = kernel.chunks_exact(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let centered = DMatrix::from_fn(n, n, |i, j| kernel[i * n + j] - row_means[i] - row_means[j] + grand);
    let diag_scale = (0..n).map(|i| kernel[i * n + i].abs()).sum::<f64>() / n as f64;

    let (values, vectors) = sorted_eigen(centered);
    let top = values.first().copied().unwrap_or(0.0);
    if top <= 1e-12 * diag_scale.max(1.0) {
        return Err(MbnError::ZeroVariance("all points share the same representation".into()));
    }
    let h = target_dim.min(effective_rank(&values)).min(n - 1);
    let mut out = Matrix::zeros(n, h);
    for (j, value) in values.iter().take(h).enumerate() {
        let scale = value.sqrt();
        let mut col: Vec<f64> = vectors.column(j).iter().map(|u| u * scale).collect();
        fix_sign(&mut col);
        for (i, v) in col.into_iter().enumerate() {
            out.set(i, j, v);
        }
    }
    Ok((Embedding::new(out)?, values[..h].to_vec()))
}

/// Reduces a sparse code through its centered match-count Gram matrix.
pub fn pca_sparse_gram(code: &SparseCode, target_dim: usize) -> Result<Embedding> {
    let n = code.n();
    let kernel: Vec<f64> = code.gram().into_iter().map(f64::from).collect();
    gram_embedding(&kernel, n, target_dim).map(|(e, _)| e)
}

/// Reduces a sparse code to at most `target_dim` principal coordinates.
pub fn pca_sparse(code: &SparseCode, target_dim: usize) -> Result<Embedding> {
    if code.n() < 2 {
        return Err(MbnError::InvalidDataset("PCA needs n >= 2".into()));
    }
    if code.implicit_dim() <= code.n() {
        let dense = code.to_dense();
        let model = pca_fit(&dense, target_dim)?;
        pca_transform(&model, &dense)
    } else {
        pca_sparse_gram(code, target_dim)
    }
}

/// Fits and applies PCA in one step.
pub fn pca_reduce(x: &Matrix, target_dim: usize) -> Result<Embedding> {
    let model = pca_fit(x, target_dim)?;
    pca_transform(&model, x)
}
