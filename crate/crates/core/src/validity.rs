//! Optimization-like cluster validity criteria: silhouette width (SWC),
//! point-biserial (PB), PBM and the variance ratio criterion (VRC).
//!
//! All distances are Euclidean. Every criterion requires `c >= 2` nonempty
//! clusters. Perfectly compact partitions (zero within-cluster spread) make
//! PBM and VRC infinite; those are reported as `+inf` with `degenerate` set
//! instead of failing, so they still rank first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Embedding, LabelVector};
use crate::error::{MbnError, Result};
use crate::matrix::{euclidean, sq_euclidean};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Criterion {
    Swc,
    Pb,
    Pbm,
    Vrc,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [Criterion::Swc, Criterion::Pb, Criterion::Pbm, Criterion::Vrc];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Swc => "SWC",
            Criterion::Pb => "PB",
            Criterion::Pbm => "PBM",
            Criterion::Vrc => "VRC",
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Criterion {
    type Err = MbnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SWC" => Ok(Criterion::Swc),
            "PB" => Ok(Criterion::Pb),
            "PBM" => Ok(Criterion::Pbm),
            "VRC" => Ok(Criterion::Vrc),
            other => Err(MbnError::Config(format!("unknown criterion '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionScore {
    pub value: f64,
    pub criterion: Criterion,
    /// Set when `value` is the `+inf` sentinel of a zero-spread partition.
    pub degenerate: bool,
}

impl CriterionScore {
    fn finite(criterion: Criterion, value: f64) -> Self {
        CriterionScore { value, criterion, degenerate: false }
    }

    fn infinite(criterion: Criterion) -> Self {
        CriterionScore { value: f64::INFINITY, criterion, degenerate: true }
    }
}

/// Every intermediate quantity of the four criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityDiagnostics {
    pub silhouette: Vec<f64>,
    /// Mean distance to the other members of the own cluster (0 for singletons).
    pub a: Vec<f64>,
    /// Smallest mean distance to another cluster.
    pub b: Vec<f64>,
    /// `g[i][q]`: mean distance from point `i` to cluster `q`.
    pub g: Vec<Vec<f64>>,
    pub d_w: f64,
    pub d_b: f64,
    pub s_d: f64,
    pub w_d: f64,
    pub b_d: f64,
    pub t: f64,
    pub e_1: f64,
    pub e_k: f64,
    pub d_k: f64,
    pub grand_mean: Vec<f64>,
    pub centroids: Vec<Vec<f64>>,
    pub cluster_sizes: Vec<usize>,
    pub trace_w: f64,
    pub trace_b: f64,
    pub h: usize,
}

fn undefined(criterion: Criterion, reason: impl Into<String>) -> MbnError {
    MbnError::CriterionUndefined { criterion: criterion.name().into(), reason: reason.into() }
}

fn check(criterion: Criterion, labels: &LabelVector, y: &Embedding) -> Result<Vec<usize>> {
    if labels.len() != y.n() {
        return Err(MbnError::DimensionMismatch { expected: y.n(), got: labels.len() });
    }
    let c = labels.num_clusters();
    if c < 2 {
        return Err(undefined(criterion, format!("needs at least 2 clusters, got {c}")));
    }
    let sizes = labels.cluster_sizes();
    if let Some(p) = sizes.iter().position(|&s| s == 0) {
        return Err(undefined(criterion, format!("cluster {p} is empty")));
    }
    Ok(sizes)
}

/// `sums[i * c + q]`: total distance from point `i` to the members of `q`.
fn cluster_distance_sums(labels: &[usize], c: usize, y: &Embedding) -> Vec<f64> {
    let n = y.n();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = vec![0.0; c];
            let yi = y.row(i);
            for (j, &l) in labels.iter().enumerate() {
                if j != i {
                    s[l] += euclidean(yi, y.row(j));
                }
            }
            s
        })
        .collect();
    rows.concat()
}

struct Silhouette {
    a: Vec<f64>,
    b: Vec<f64>,
    s: Vec<f64>,
    g: Vec<Vec<f64>>,
}

fn silhouette_parts(labels: &[usize], sizes: &[usize], sums: &[f64]) -> Silhouette {
    let c = sizes.len();
    let n = labels.len();
    let mut out = Silhouette { a: vec![0.0; n], b: vec![0.0; n], s: vec![0.0; n], g: Vec::with_capacity(n) };
    for (i, &p) in labels.iter().enumerate() {
        let row = &sums[i * c..(i + 1) * c];
        let g: Vec<f64> = row.iter().zip(sizes).map(|(s, &nq)| s / nq as f64).collect();
        let b = (0..c).filter(|&q| q != p).map(|q| g[q]).fold(f64::INFINITY, f64::min);
        out.b[i] = b;
        if sizes[p] > 1 {
            let a = row[p] / (sizes[p] - 1) as f64;
            out.a[i] = a;
            let m = a.max(b);
            out.s[i] = if m > 0.0 { (b - a) / m } else { 0.0 };
        }
        out.g.push(g);
    }
    out
}

pub fn swc(labels: &LabelVector, y: &Embedding) -> Result<CriterionScore> {
    let sizes = check(Criterion::Swc, labels, y)?;
    let sums = cluster_distance_sums(labels.as_slice(), sizes.len(), y);
    let parts = silhouette_parts(labels.as_slice(), &sizes, &sums);
    Ok(CriterionScore::finite(Criterion::Swc, parts.s.iter().sum::<f64>() / y.n() as f64))
}

struct PairCounts {
    w_d: f64,
    b_d: f64,
    t: f64,
}

fn pair_counts(sizes: &[usize], n: usize) -> PairCounts {
    let w_d = sizes.iter().map(|&p| (p * (p.saturating_sub(1))) as f64 / 2.0).sum::<f64>();
    let b_d = sizes.iter().map(|&p| (p * (n - p)) as f64 / 2.0).sum::<f64>();
    let t = (n * (n - 1)) as f64 / 2.0;
    debug_assert!((w_d + b_d - t).abs() < 0.5, "pair counts do not add up");
    PairCounts { w_d, b_d, t }
}

/// Population standard deviation of all pairwise distances.
fn pairwise_distance_std(y: &Embedding) -> f64 {
    let n = y.n();
    let (sum, sum_sq) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            let mut s2 = 0.0;
            for j in i + 1..n {
                let d = euclidean(y.row(i), y.row(j));
                s += d;
                s2 += d * d;
            }
            (s, s2)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (x, z)| (a + x, b + z));
    let t = (n * (n - 1)) as f64 / 2.0;
    let mean = sum / t;
    (sum_sq / t - mean * mean).max(0.0).sqrt()
}

fn pb_terms(labels: &[usize], sizes: &[usize], sums: &[f64], a: &[f64]) -> (f64, f64) {
    let n = labels.len();
    let c = sizes.len();
    let d_w = a.iter().sum::<f64>() / n as f64;
    let d_b = labels
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let outside: f64 = (0..c).filter(|&q| q != p).map(|q| sums[i * c + q]).sum();
            outside / (n - sizes[p]) as f64
        })
        .sum::<f64>()
        / n as f64;
    (d_w, d_b)
}

pub fn pb(labels: &LabelVector, y: &Embedding) -> Result<CriterionScore> {
    let sizes = check(Criterion::Pb, labels, y)?;
    let n = y.n();
    let sums = cluster_distance_sums(labels.as_slice(), sizes.len(), y);
    let parts = silhouette_parts(labels.as_slice(), &sizes, &sums);
    let (d_w, d_b) = pb_terms(labels.as_slice(), &sizes, &sums, &parts.a);
    let s_d = pairwise_distance_std(y);
    if !(s_d > 0.0) {
        return Err(undefined(Criterion::Pb, "all pairwise distances are equal (s_d = 0)"));
    }
    let PairCounts { w_d, b_d, t } = pair_counts(&sizes, n);
    Ok(CriterionScore::finite(Criterion::Pb, (d_b - d_w) * (w_d * b_d / (t * t)).sqrt() / s_d))
}

fn means(labels: &[usize], sizes: &[usize], y: &Embedding) -> (Vec<f64>, Vec<Vec<f64>>) {
    let h = y.dim();
    let mut grand = vec![0.0; h];
    let mut centroids = vec![vec![0.0; h]; sizes.len()];
    for (i, &l) in labels.iter().enumerate() {
        for (j, v) in y.row(i).iter().enumerate() {
            grand[j] += v;
            centroids[l][j] += v;
        }
    }
    grand.iter_mut().for_each(|g| *g /= y.n() as f64);
    for (cent, &s) in centroids.iter_mut().zip(sizes) {
        cent.iter_mut().for_each(|v| *v /= s as f64);
    }
    (grand, centroids)
}

struct PbmTerms {
    e_1: f64,
    e_k: f64,
    d_k: f64,
}

fn pbm_terms(labels: &[usize], y: &Embedding, grand: &[f64], centroids: &[Vec<f64>]) -> PbmTerms {
    let n = y.n() as f64;
    let e_1 = (0..y.n()).map(|i| euclidean(y.row(i), grand)).sum::<f64>() / n;
    let e_k = labels.iter().enumerate().map(|(i, &l)| euclidean(y.row(i), &centroids[l])).sum::<f64>() / n;
    let mut d_k = 0.0f64;
    for p in 0..centroids.len() {
        for q in p + 1..centroids.len() {
            d_k = d_k.max(euclidean(&centroids[p], &centroids[q]));
        }
    }
    PbmTerms { e_1, e_k, d_k }
}

pub fn pbm(labels: &LabelVector, y: &Embedding) -> Result<CriterionScore> {
    let sizes = check(Criterion::Pbm, labels, y)?;
    let (grand, centroids) = means(labels.as_slice(), &sizes, y);
    let PbmTerms { e_1, e_k, d_k } = pbm_terms(labels.as_slice(), y, &grand, &centroids);
    if !(e_k > 0.0) {
        return Ok(CriterionScore::infinite(Criterion::Pbm));
    }
    let c = sizes.len() as f64;
    let inner = e_1 / e_k * d_k / c;
    Ok(CriterionScore::finite(Criterion::Pbm, inner * inner))
}

fn scatter_traces(
    labels: &[usize],
    sizes: &[usize],
    y: &Embedding,
    grand: &[f64],
    centroids: &[Vec<f64>],
) -> (f64, f64) {
    let trace_w = labels.iter().enumerate().map(|(i, &l)| sq_euclidean(y.row(i), &centroids[l])).sum::<f64>();
    let trace_b = centroids.iter().zip(sizes).map(|(m, &s)| s as f64 * sq_euclidean(m, grand)).sum::<f64>();
    (trace_w, trace_b)
}

/// VRC with an explicit feature dimension `h` in the normalizer.
pub fn vrc_with_dim(labels: &LabelVector, y: &Embedding, h: usize) -> Result<CriterionScore> {
    let sizes = check(Criterion::Vrc, labels, y)?;
    let n = y.n();
    let c = sizes.len();
    if n <= c {
        return Err(undefined(Criterion::Vrc, format!("needs n > c, got n={n}, c={c}")));
    }
    let (grand, centroids) = means(labels.as_slice(), &sizes, y);
    let (trace_w, trace_b) = scatter_traces(labels.as_slice(), &sizes, y, &grand, &centroids);
    if !(trace_w > 0.0) {
        return Ok(CriterionScore::infinite(Criterion::Vrc));
    }
    let value = (n - c) as f64 / (c - 1) as f64 * trace_b / trace_w / h.max(1) as f64;
    Ok(CriterionScore::finite(Criterion::Vrc, value))
}

pub fn vrc(labels: &LabelVector, y: &Embedding) -> Result<CriterionScore> {
    vrc_with_dim(labels, y, y.dim())
}

pub fn evaluate(criterion: Criterion, labels: &LabelVector, y: &Embedding) -> Result<CriterionScore> {
    match criterion {
        Criterion::Swc => swc(labels, y),
        Criterion::Pb => pb(labels, y),
        Criterion::Pbm => pbm(labels, y),
        Criterion::Vrc => vrc(labels, y),
    }
}

/// Computes every intermediate quantity at once (for reports).
pub fn diagnostics(labels: &LabelVector, y: &Embedding) -> Result<ValidityDiagnostics> {
    let sizes = check(Criterion::Swc, labels, y)?;
    let l = labels.as_slice();
    let n = y.n();
    let sums = cluster_distance_sums(l, sizes.len(), y);
    let parts = silhouette_parts(l, &sizes, &sums);
    let (d_w, d_b) = pb_terms(l, &sizes, &sums, &parts.a);
    let PairCounts { w_d, b_d, t } = pair_counts(&sizes, n);
    let (grand_mean, centroids) = means(l, &sizes, y);
    let PbmTerms { e_1, e_k, d_k } = pbm_terms(l, y, &grand_mean, &centroids);
    let (trace_w, trace_b) = scatter_traces(l, &sizes, y, &grand_mean, &centroids);
    Ok(ValidityDiagnostics {
        silhouette: parts.s,
        a: parts.a,
        b: parts.b,
        g: parts.g,
        d_w,
        d_b,
        s_d: pairwise_distance_std(y),
        w_d,
        b_d,
        t,
        e_1,
        e_k,
        d_k,
        grand_mean,
        centroids,
        cluster_sizes: sizes,
        trace_w,
        trace_b,
        h: y.dim(),
    })
}
