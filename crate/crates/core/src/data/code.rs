use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MbnError, Result};
use crate::matrix::Matrix;

/// Outputs of `v` independent `k`-centroid clusterings for `n` points,
/// stored row-major as winning-centroid indices.
///
/// The implied binary representation has `v * k` coordinates with exactly `v`
/// ones per point. Inner products between two such vectors are the number of
/// clusterings in which both points picked the same centroid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBlock")]
pub struct CodeBlock {
    n: usize,
    v: usize,
    k: u32,
    assignments: Vec<u32>,
}

#[derive(Deserialize)]
struct RawBlock {
    n: usize,
    v: usize,
    k: u32,
    assignments: Vec<u32>,
}

impl TryFrom<RawBlock> for CodeBlock {
    type Error = MbnError;

    fn try_from(r: RawBlock) -> Result<Self> {
        CodeBlock::new(r.n, r.v, r.k, r.assignments)
    }
}

impl CodeBlock {
    pub fn new(n: usize, v: usize, k: u32, assignments: Vec<u32>) -> Result<Self> {
        if v == 0 || k == 0 {
            return Err(MbnError::InvalidCode(format!("block needs v >= 1 and k >= 1 (v={v}, k={k})")));
        }
        if assignments.len() != n * v {
            return Err(MbnError::InvalidCode(format!(
                "block has {} assignments, expected n*v = {}",
                assignments.len(),
                n * v
            )));
        }
        if let Some(pos) = assignments.iter().position(|&a| a >= k) {
            return Err(MbnError::InvalidCode(format!(
                "assignment {} at point {}, clustering {} is not below k = {k}",
                assignments[pos],
                pos / v,
                pos % v
            )));
        }
        Ok(CodeBlock { n, v, k, assignments })
    }

    /// Builds a block from per-clustering columns (`columns[t][i]`).
    pub fn from_columns(n: usize, k: u32, columns: &[Vec<u32>]) -> Result<Self> {
        let v = columns.len();
        let mut assignments = vec![0u32; n * v];
        for (t, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(MbnError::InvalidCode(format!("column {t} has {} rows, expected {n}", col.len())));
            }
            for (i, &a) in col.iter().enumerate() {
                assignments[i * v + t] = a;
            }
        }
        CodeBlock::new(n, v, k, assignments)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of clusterings.
    #[inline]
    pub fn v(&self) -> usize {
        self.v
    }

    /// Centroids per clustering.
    #[inline]
    pub fn k(&self) -> u32 {
        self.k
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.assignments[i * self.v..(i + 1) * self.v]
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    pub fn implicit_dim(&self) -> usize {
        self.v * self.k as usize
    }

    #[inline]
    pub fn matches(&self, i: usize, j: usize) -> u32 {
        self.row(i).iter().zip(self.row(j)).filter(|(a, b)| a == b).count() as u32
    }

    /// Inner product between point `i` of `self` and point `j` of `other`,
    /// which must have the same shape.
    #[inline]
    pub fn cross_matches(&self, i: usize, other: &CodeBlock, j: usize) -> u32 {
        self.row(i).iter().zip(other.row(j)).filter(|(a, b)| a == b).count() as u32
    }

    pub fn same_shape(&self, other: &CodeBlock) -> bool {
        self.n == other.n && self.v == other.v && self.k == other.k
    }

    /// Per-clustering counts of points on each centroid, `v * k` row-major.
    pub fn histograms(&self) -> Vec<u64> {
        let k = self.k as usize;
        let mut hist = vec![0u64; self.v * k];
        for row in self.assignments.chunks_exact(self.v) {
            for (t, &a) in row.iter().enumerate() {
                hist[t * k + a as usize] += 1;
            }
        }
        hist
    }

    /// Adds this block's match counts into an `n x n` accumulator.
    fn accumulate_gram(&self, gram: &mut [u32]) {
        let n = self.n;
        let k = self.k as usize;
        let mut counts = vec![0usize; k + 1];
        let mut order = vec![0usize; n];
        for t in 0..self.v {
            counts.iter_mut().for_each(|c| *c = 0);
            for i in 0..n {
                counts[self.assignments[i * self.v + t] as usize + 1] += 1;
            }
            for c in 1..=k {
                counts[c] += counts[c - 1];
            }
            let mut fill = counts.clone();
            for i in 0..n {
                let a = self.assignments[i * self.v + t] as usize;
                order[fill[a]] = i;
                fill[a] += 1;
            }
            for c in 0..k {
                let bucket = &order[counts[c]..counts[c + 1]];
                for &i in bucket {
                    let row = &mut gram[i * n..(i + 1) * n];
                    for &j in bucket {
                        row[j] += 1;
                    }
                }
            }
        }
    }
}

/// Concatenation of one or more code blocks over the same points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCode")]
pub struct SparseCode {
    n: usize,
    blocks: Vec<Arc<CodeBlock>>,
}

#[derive(Deserialize)]
struct RawCode {
    blocks: Vec<Arc<CodeBlock>>,
}

impl TryFrom<RawCode> for SparseCode {
    type Error = MbnError;

    fn try_from(r: RawCode) -> Result<Self> {
        SparseCode::new(r.blocks)
    }
}

impl SparseCode {
    pub fn new(blocks: Vec<Arc<CodeBlock>>) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| MbnError::InvalidCode("code has no blocks".into()))?;
        let n = first.n();
        if let Some(b) = blocks.iter().find(|b| b.n() != n) {
            return Err(MbnError::InvalidCode(format!("blocks disagree on point count ({} vs {n})", b.n())));
        }
        Ok(SparseCode { n, blocks })
    }

    pub fn single(block: CodeBlock) -> Self {
        SparseCode { n: block.n(), blocks: vec![Arc::new(block)] }
    }

    pub fn concat<'a>(codes: impl IntoIterator<Item = &'a SparseCode>) -> Result<Self> {
        let blocks = codes.into_iter().flat_map(|c| c.blocks.iter().cloned()).collect();
        SparseCode::new(blocks)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Arc<CodeBlock>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Total number of clusterings (ones per point).
    pub fn units(&self) -> usize {
        self.blocks.iter().map(|b| b.v()).sum()
    }

    pub fn implicit_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.implicit_dim()).sum()
    }

    #[inline]
    pub fn dot(&self, i: usize, j: usize) -> u32 {
        self.blocks.iter().map(|b| b.matches(i, j)).sum()
    }

    /// Full `n x n` match-count Gram matrix, row-major.
    pub fn gram(&self) -> Vec<u32> {
        let n = self.n;
        self.blocks
            .par_iter()
            .fold(
                || vec![0u32; n * n],
                |mut acc, b| {
                    b.accumulate_gram(&mut acc);
                    acc
                },
            )
            .reduce(
                || vec![0u32; n * n],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    }

    /// Explicit binary expansion (`n x implicit_dim`). Only sensible for
    /// small codes.
    pub fn to_dense(&self) -> Matrix {
        let dim = self.implicit_dim();
        let mut m = Matrix::zeros(self.n, dim);
        for i in 0..self.n {
            let row = m.row_mut(i);
            let mut offset = 0;
            for b in &self.blocks {
                let k = b.k() as usize;
                for (t, &a) in b.row(i).iter().enumerate() {
                    row[offset + t * k + a as usize] = 1.0;
                }
                offset += b.implicit_dim();
            }
        }
        m
    }

    /// Sub-code restricted to the given point indices.
    pub fn select_rows(&self, idx: &[usize]) -> Result<SparseCode> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let mut a = Vec::with_capacity(idx.len() * b.v());
                for &i in idx {
                    a.extend_from_slice(b.row(i));
                }
                CodeBlock::new(idx.len(), b.v(), b.k(), a).map(Arc::new)
            })
            .collect::<Result<Vec<_>>>()?;
        SparseCode::new(blocks)
    }
}
