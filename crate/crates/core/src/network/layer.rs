use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::round_half_up;
use crate::data::{CodeBlock, Metric};
use crate::error::{MbnError, Result};
use crate::matrix::Matrix;
use crate::rng;

/// One `k`-centroid clustering: centroids are rows of the layer input, and
/// distances only look at `feature_subset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringUnit {
    pub centroid_rows: Vec<u32>,
    /// Input coordinates (dense input) or previous-layer clusterings (sparse
    /// input) visible to this unit, ascending.
    pub feature_subset: Vec<u32>,
    /// Seeds the choice among equally near centroids.
    pub tie_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub k: usize,
    pub units: Vec<ClusteringUnit>,
    /// Training-set code of this layer. Dropped for intermediate layers when
    /// the model is trained with `retain_layer_codes = false`.
    pub output: Option<Arc<CodeBlock>>,
}

impl Layer {
    pub fn v(&self) -> usize {
        self.units.len()
    }

    pub fn output(&self) -> Result<&Arc<CodeBlock>> {
        self.output
            .as_ref()
            .ok_or_else(|| MbnError::Config("layer training code was not retained; cannot encode new data".into()))
    }

    /// Rejects units that reference rows or coordinates outside the
    /// training input (possible only for hand-edited or foreign files).
    fn check_units(&self, n: usize, dims: usize) -> Result<()> {
        for (u, unit) in self.units.iter().enumerate() {
            let bad_row = unit.centroid_rows.iter().any(|&r| r as usize >= n);
            let bad_dim = unit.feature_subset.iter().any(|&f| f as usize >= dims);
            if unit.centroid_rows.len() != self.k || bad_row || bad_dim || unit.feature_subset.is_empty() {
                return Err(MbnError::Format(format!("clustering unit {u} does not fit its training input")));
            }
        }
        Ok(())
    }

    /// Assigns new dense points using centroids taken from `train`.
    pub fn encode_dense(&self, train: &Matrix, metric: Metric, new: &Matrix) -> Result<CodeBlock> {
        if new.cols() != train.cols() {
            return Err(MbnError::DimensionMismatch { expected: train.cols(), got: new.cols() });
        }
        self.check_units(train.rows(), train.cols())?;
        let index = RowIndex::dense(new);
        let columns: Vec<Vec<u32>> =
            self.units.par_iter().map(|u| assign_dense(new, &index, train, metric, u)).collect();
        CodeBlock::from_columns(new.rows(), self.k as u32, &columns)
    }

    /// Assigns new points given their code at the previous layer.
    pub fn encode_sparse(&self, train_prev: &CodeBlock, new_prev: &CodeBlock) -> Result<CodeBlock> {
        if train_prev.v() != new_prev.v() || train_prev.k() != new_prev.k() {
            return Err(MbnError::Shape(format!(
                "previous-layer code has V={}, k={}, expected V={}, k={}",
                new_prev.v(),
                new_prev.k(),
                train_prev.v(),
                train_prev.k()
            )));
        }
        self.check_units(train_prev.n(), train_prev.v())?;
        let index = RowIndex::sparse(new_prev);
        let columns: Vec<Vec<u32>> =
            self.units.par_iter().map(|u| assign_sparse(new_prev, &index, train_prev, u)).collect();
        CodeBlock::from_columns(new_prev.n(), self.k as u32, &columns)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum LayerInput<'a> {
    Dense { features: &'a Matrix, metric: Metric },
    Sparse(&'a CodeBlock),
}

impl LayerInput<'_> {
    pub fn n(&self) -> usize {
        match self {
            LayerInput::Dense { features, .. } => features.rows(),
            LayerInput::Sparse(b) => b.n(),
        }
    }

    /// Coordinates available for random feature selection.
    pub fn dims(&self) -> usize {
        match self {
            LayerInput::Dense { features, .. } => features.cols(),
            LayerInput::Sparse(b) => b.v(),
        }
    }
}

/// Groups identical input rows so each distinct row is scored once per unit,
/// and gives each distinct row a content hash used for tie-breaking.
#[derive(Debug, Clone)]
pub struct RowIndex {
    class_of: Vec<u32>,
    representatives: Vec<usize>,
    hashes: Vec<u64>,
}

impl RowIndex {
    fn build<T: PartialEq>(n: usize, row: impl Fn(usize) -> T, hash: impl Fn(usize) -> u64) -> Self {
        let mut buckets: HashMap<u64, Vec<u32>> = HashMap::new();
        let mut class_of = Vec::with_capacity(n);
        let mut representatives = Vec::new();
        let mut hashes = Vec::new();
        for i in 0..n {
            let h = hash(i);
            let bucket = buckets.entry(h).or_default();
            let existing = bucket.iter().copied().find(|&c| row(representatives[c as usize]) == row(i));
            let class = match existing {
                Some(c) => c,
                None => {
                    let c = representatives.len() as u32;
                    representatives.push(i);
                    hashes.push(h);
                    bucket.push(c);
                    c
                }
            };
            class_of.push(class);
        }
        RowIndex { class_of, representatives, hashes }
    }

    pub fn dense(m: &Matrix) -> Self {
        RowIndex::build(
            m.rows(),
            |i| m.row(i).iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            |i| m.row(i).iter().fold(0x51_7C_C1_B7_27_22_0A_95, |h, x| rng::mix64(h ^ x.to_bits())),
        )
    }

    pub fn sparse(b: &CodeBlock) -> Self {
        RowIndex::build(
            b.n(),
            |i| b.row(i),
            |i| b.row(i).iter().fold(0x51_7C_C1_B7_27_22_0A_95, |h, &x| rng::mix64(h ^ u64::from(x))),
        )
    }

    pub fn num_distinct(&self) -> usize {
        self.representatives.len()
    }

    fn expand(&self, per_class: &[u32]) -> Vec<u32> {
        self.class_of.iter().map(|&c| per_class[c as usize]).collect()
    }
}

/// Uniform pick in `0..len` keyed by the unit and the row content.
#[inline]
fn tie_pick(tie_seed: u64, row_hash: u64, len: usize) -> usize {
    let h = rng::mix64(tie_seed ^ rng::mix64(row_hash));
    ((u128::from(h) * len as u128) >> 64) as usize
}

/// Index of the `r`-th entry equal to `best`.
#[inline]
fn nth_equal<T: PartialEq + Copy>(scores: &[T], best: T, mut r: usize) -> usize {
    for (c, &s) in scores.iter().enumerate() {
        if s == best {
            if r == 0 {
                return c;
            }
            r -= 1;
        }
    }
    unreachable!("tie index out of range")
}

fn assign_dense(
    queries: &Matrix,
    index: &RowIndex,
    source: &Matrix,
    metric: Metric,
    unit: &ClusteringUnit,
) -> Vec<u32> {
    let m = unit.feature_subset.len();
    let k = unit.centroid_rows.len();
    let gather = |row: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend(unit.feature_subset.iter().map(|&f| row[f as usize]));
    };
    let mut centroids = Vec::with_capacity(k * m);
    let mut buf = Vec::with_capacity(m);
    for &c in &unit.centroid_rows {
        gather(source.row(c as usize), &mut buf);
        centroids.extend_from_slice(&buf);
    }
    let norms: Vec<f64> = match metric {
        Metric::Cosine => centroids.chunks_exact(m).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect(),
        Metric::Euclidean => Vec::new(),
    };

    let mut scores = vec![0.0f64; k];
    let per_class: Vec<u32> = index
        .representatives
        .iter()
        .zip(&index.hashes)
        .map(|(&r, &h)| {
            gather(queries.row(r), &mut buf);
            // Higher score = nearer.
            match metric {
                Metric::Euclidean => {
                    for (s, c) in scores.iter_mut().zip(centroids.chunks_exact(m)) {
                        *s = -c.iter().zip(&buf).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                    }
                }
                Metric::Cosine => {
                    let qn = buf.iter().map(|x| x * x).sum::<f64>().sqrt();
                    for ((s, c), cn) in scores.iter_mut().zip(centroids.chunks_exact(m)).zip(&norms) {
                        let denom = qn * cn;
                        *s =
                            if denom > 0.0 { c.iter().zip(&buf).map(|(a, b)| a * b).sum::<f64>() / denom } else { 0.0 };
                    }
                }
            }
            let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ties = scores.iter().filter(|&&s| s == best).count();
            let pick = if ties == 1 { 0 } else { tie_pick(unit.tie_seed, h, ties) };
            nth_equal(&scores, best, pick) as u32
        })
        .collect();
    index.expand(&per_class)
}

fn assign_sparse(queries: &CodeBlock, index: &RowIndex, source: &CodeBlock, unit: &ClusteringUnit) -> Vec<u32> {
    let kp = source.k() as usize;
    let k = unit.centroid_rows.len();
    let s = unit.feature_subset.len();

    // Per visible clustering, centroids grouped by their previous-layer value.
    let stride = kp + 1;
    let mut offsets = vec![0u32; s * stride];
    for (ti, &t) in unit.feature_subset.iter().enumerate() {
        let off = &mut offsets[ti * stride..(ti + 1) * stride];
        for &c in &unit.centroid_rows {
            off[source.row(c as usize)[t as usize] as usize + 1] += 1;
        }
        for v in 1..stride {
            off[v] += off[v - 1];
        }
    }
    let mut entries = vec![0u32; s * k];
    let mut fill: Vec<u32> = Vec::with_capacity(stride);
    for (ti, &t) in unit.feature_subset.iter().enumerate() {
        fill.clear();
        fill.extend_from_slice(&offsets[ti * stride..(ti + 1) * stride]);
        let base = ti * k;
        for (ci, &c) in unit.centroid_rows.iter().enumerate() {
            let v = source.row(c as usize)[t as usize] as usize;
            entries[base + fill[v] as usize] = ci as u32;
            fill[v] += 1;
        }
    }

    let mut counts = vec![0u32; k];
    let per_class: Vec<u32> = index
        .representatives
        .iter()
        .zip(&index.hashes)
        .map(|(&r, &h)| {
            counts.iter_mut().for_each(|c| *c = 0);
            let row = queries.row(r);
            for (ti, &t) in unit.feature_subset.iter().enumerate() {
                let v = row[t as usize] as usize;
                let lo = offsets[ti * stride + v] as usize;
                let hi = offsets[ti * stride + v + 1] as usize;
                for &c in &entries[ti * k + lo..ti * k + hi] {
                    counts[c as usize] += 1;
                }
            }
            let best = counts.iter().copied().max().unwrap_or(0);
            let ties = counts.iter().filter(|&&c| c == best).count();
            let pick = if ties == 1 { 0 } else { tie_pick(unit.tie_seed, h, ties) };
            nth_equal(&counts, best, pick) as u32
        })
        .collect();
    index.expand(&per_class)
}

/// Largest number of distinct rows for which a layer precomputes all
/// pairwise match counts (a `D x D` table of `u16`).
const MATCH_TABLE_LIMIT: usize = 4096;

/// Match counts between every pair of distinct input rows over all
/// clusterings. When a unit sees every clustering, its scores are a lookup.
struct MatchTable {
    d: usize,
    counts: Vec<u16>,
}

impl MatchTable {
    fn build(block: &CodeBlock, index: &RowIndex) -> Option<Self> {
        let d = index.num_distinct();
        if d > MATCH_TABLE_LIMIT || block.v() > u16::MAX as usize {
            return None;
        }
        let reps = &index.representatives;
        let upper: Vec<Vec<u16>> = (0..d)
            .into_par_iter()
            .map(|a| {
                let ra = block.row(reps[a]);
                reps[a..]
                    .iter()
                    .map(|&rb| ra.iter().zip(block.row(rb)).filter(|(x, y)| x == y).count() as u16)
                    .collect()
            })
            .collect();
        let mut counts = vec![0u16; d * d];
        for (a, row) in upper.iter().enumerate() {
            for (off, &m) in row.iter().enumerate() {
                counts[a * d + a + off] = m;
                counts[(a + off) * d + a] = m;
            }
        }
        Some(MatchTable { d, counts })
    }
}

fn assign_by_table(index: &RowIndex, table: &MatchTable, unit: &ClusteringUnit) -> Vec<u32> {
    let classes: Vec<usize> = unit.centroid_rows.iter().map(|&c| index.class_of[c as usize] as usize).collect();
    let mut counts = vec![0u32; classes.len()];
    let per_class: Vec<u32> = (0..table.d)
        .zip(&index.hashes)
        .map(|(r, &h)| {
            let row = &table.counts[r * table.d..(r + 1) * table.d];
            for (slot, &c) in counts.iter_mut().zip(&classes) {
                *slot = u32::from(row[c]);
            }
            let best = counts.iter().copied().max().unwrap_or(0);
            let ties = counts.iter().filter(|&&c| c == best).count();
            let pick = if ties == 1 { 0 } else { tie_pick(unit.tie_seed, h, ties) };
            nth_equal(&counts, best, pick) as u32
        })
        .collect();
    index.expand(&per_class)
}

/// Trains `v` independent `k`-centroid clusterings on `input`.
///
/// Unit `u` draws its centroids and visible features from the substream
/// `(layer_seed, u)`, so the result is independent of thread scheduling.
pub fn train_layer(input: LayerInput<'_>, k: usize, v: usize, feature_ratio: f64, layer_seed: u64) -> Result<Layer> {
    let n = input.n();
    if k == 0 || k > n {
        return Err(MbnError::Config(format!("cannot sample k={k} distinct centroids from {n} points")));
    }
    if v == 0 {
        return Err(MbnError::Config("a layer needs at least one clustering".into()));
    }
    if !(feature_ratio > 0.0 && feature_ratio <= 1.0) {
        return Err(MbnError::Config(format!("feature_ratio must lie in (0, 1], got {feature_ratio}")));
    }
    if let LayerInput::Sparse(b) = input {
        if b.k() as usize > u32::MAX as usize {
            return Err(MbnError::Shape("previous layer too wide".into()));
        }
    }
    let dims = input.dims();
    let visible = round_half_up(feature_ratio * dims as f64).clamp(1, dims);
    let index = match input {
        LayerInput::Dense { features, .. } => RowIndex::dense(features),
        LayerInput::Sparse(b) => RowIndex::sparse(b),
    };

    let table = match input {
        LayerInput::Sparse(b) if visible == dims => MatchTable::build(b, &index),
        _ => None,
    };

    let trained: Vec<(ClusteringUnit, Vec<u32>)> = (0..v)
        .into_par_iter()
        .map(|u| {
            let mut rng = rng::stream(layer_seed, &[u as u64]);
            let centroid_rows: Vec<u32> = sample(&mut rng, n, k).into_iter().map(|i| i as u32).collect();
            let mut feature_subset: Vec<u32> = sample(&mut rng, dims, visible).into_iter().map(|i| i as u32).collect();
            feature_subset.sort_unstable();
            let unit = ClusteringUnit { centroid_rows, feature_subset, tie_seed: rng.next_u64() };
            let column = match (input, &table) {
                (LayerInput::Dense { features, metric }, _) => assign_dense(features, &index, features, metric, &unit),
                (LayerInput::Sparse(_), Some(t)) => assign_by_table(&index, t, &unit),
                (LayerInput::Sparse(b), None) => assign_sparse(b, &index, b, &unit),
            };
            (unit, column)
        })
        .collect();

    let (units, columns): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
    let output = CodeBlock::from_columns(n, k as u32, &columns)?;
    Ok(Layer { k, units, output: Some(Arc::new(output)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_blobs, BlobsSpec};

    fn points() -> Matrix {
        Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![5.0, 5.0], vec![9.0, 1.0], vec![3.0, 7.0]]).unwrap()
    }

    #[test]
    fn every_point_is_its_own_centroid_when_k_equals_n() {
        let x = points();
        let layer = train_layer(LayerInput::Dense { features: &x, metric: Metric::Euclidean }, 5, 3, 1.0, 11).unwrap();
        let out = layer.output().unwrap();
        for (t, unit) in layer.units.iter().enumerate() {
            for i in 0..5 {
                let c = out.row(i)[t] as usize;
                assert_eq!(unit.centroid_rows[c] as usize, i);
            }
        }
    }

    #[test]
    fn separated_blobs_split_by_membership() {
        let ds =
            make_blobs(&BlobsSpec { seed: 3, clusters: 2, per_cluster: 10, dims: 2, separation: 50.0, spread: 0.5 })
                .unwrap();
        let truth = ds.labels.as_ref().unwrap().as_slice();
        // Search for a seed whose single unit draws one centroid per blob.
        let mut checked = 0;
        for seed in 0..50 {
            let layer =
                train_layer(LayerInput::Dense { features: &ds.features, metric: Metric::Euclidean }, 2, 1, 1.0, seed)
                    .unwrap();
            let rows = &layer.units[0].centroid_rows;
            if truth[rows[0] as usize] == truth[rows[1] as usize] {
                continue;
            }
            let out = layer.output().unwrap();
            for i in 0..ds.n() {
                let c = out.row(i)[0] as usize;
                assert_eq!(truth[rows[c] as usize], truth[i]);
            }
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let x = points();
        let input = LayerInput::Dense { features: &x, metric: Metric::Cosine };
        assert_eq!(train_layer(input, 3, 8, 0.5, 5).unwrap(), train_layer(input, 3, 8, 0.5, 5).unwrap());
        assert_ne!(train_layer(input, 3, 8, 0.5, 5).unwrap(), train_layer(input, 3, 8, 0.5, 6).unwrap());
    }

    #[test]
    fn rejects_k_above_n() {
        let x = points();
        let err = train_layer(LayerInput::Dense { features: &x, metric: Metric::Euclidean }, 6, 1, 1.0, 0);
        assert!(err.is_err());
    }

    #[test]
    fn identical_rows_get_identical_codes() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]])
            .unwrap();
        let layer = train_layer(LayerInput::Dense { features: &x, metric: Metric::Euclidean }, 3, 20, 0.5, 9).unwrap();
        let out = layer.output().unwrap();
        assert_eq!(out.row(0), out.row(1));
        assert_eq!(out.row(0), out.row(4));
    }

    #[test]
    fn sparse_assignment_maximizes_matches() {
        let prev =
            CodeBlock::new(6, 4, 3, vec![0, 1, 2, 0, 0, 1, 2, 1, 2, 2, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0, 2, 1, 2, 2])
                .unwrap();
        let layer = train_layer(LayerInput::Sparse(&prev), 3, 10, 0.5, 4).unwrap();
        let out = layer.output().unwrap();
        for (t, unit) in layer.units.iter().enumerate() {
            for i in 0..6 {
                let score = |c: usize| {
                    let row_c = prev.row(unit.centroid_rows[c] as usize);
                    unit.feature_subset.iter().filter(|&&f| row_c[f as usize] == prev.row(i)[f as usize]).count()
                };
                let best = (0..3).map(score).max().unwrap();
                assert_eq!(score(out.row(i)[t] as usize), best);
            }
        }
    }

    #[test]
    fn match_table_agrees_with_inverted_index() {
        let mut rng = rng::stream(3, &[]);
        let n = 40;
        let assignments: Vec<u32> = (0..n * 12).map(|_| (rng.next_u64() % 4) as u32).collect();
        let mut prev = CodeBlock::new(n, 12, 4, assignments).unwrap();
        // Duplicate a few rows so classes matter.
        let mut rows: Vec<u32> = prev.assignments().to_vec();
        rows.copy_within(0..24, 24);
        prev = CodeBlock::new(n, 12, 4, rows).unwrap();
        let index = RowIndex::sparse(&prev);
        let table = MatchTable::build(&prev, &index).unwrap();
        for seed in 0..20 {
            let mut r = rng::stream(seed, &[]);
            let centroid_rows = sample(&mut r, n, 9).into_iter().map(|i| i as u32).collect();
            let unit = ClusteringUnit { centroid_rows, feature_subset: (0..12).collect(), tie_seed: r.next_u64() };
            assert_eq!(assign_by_table(&index, &table, &unit), assign_sparse(&prev, &index, &prev, &unit));
        }
    }
}
