//! Reference implementations written straight from the definitions, used
//! to cross-check the library.
#![allow(dead_code, clippy::needless_range_loop)]

use mbn::data::{CodeBlock, SparseCode};
use proptest::prelude::*;

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn members(labels: &[usize], c: usize) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); c];
    for (i, &l) in labels.iter().enumerate() {
        m[l].push(i);
    }
    m
}

fn mean_of(points: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let mut mu = vec![0.0; points[0].len()];
    for &i in idx {
        for (m, v) in mu.iter_mut().zip(&points[i]) {
            *m += v / idx.len() as f64;
        }
    }
    mu
}

/// Mean distance from `i` to the listed points, skipping `i` itself.
fn avg_dist(points: &[Vec<f64>], i: usize, to: &[usize]) -> f64 {
    let others: Vec<usize> = to.iter().copied().filter(|&j| j != i).collect();
    if others.is_empty() {
        return 0.0;
    }
    others.iter().map(|&j| dist(&points[i], &points[j])).sum::<f64>() / others.len() as f64
}

pub fn naive_swc(points: &[Vec<f64>], labels: &[usize], c: usize) -> f64 {
    let m = members(labels, c);
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let p = labels[i];
        if m[p].len() == 1 {
            continue;
        }
        let a = avg_dist(points, i, &m[p]);
        let b = (0..c).filter(|&q| q != p).map(|q| avg_dist(points, i, &m[q])).fold(f64::INFINITY, f64::min);
        let s = if a.max(b) > 0.0 { (b - a) / a.max(b) } else { 0.0 };
        total += s;
    }
    total / n as f64
}

pub fn naive_pb(points: &[Vec<f64>], labels: &[usize], c: usize) -> f64 {
    let m = members(labels, c);
    let n = points.len();
    let d_w = (0..n).map(|i| avg_dist(points, i, &m[labels[i]])).sum::<f64>() / n as f64;
    let d_b = (0..n)
        .map(|i| {
            let outside: Vec<usize> = (0..n).filter(|&j| labels[j] != labels[i]).collect();
            avg_dist(points, i, &outside)
        })
        .sum::<f64>()
        / n as f64;
    let mut pair_d = Vec::new();
    let (mut w_d, mut b_d) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            pair_d.push(dist(&points[i], &points[j]));
            if labels[i] == labels[j] {
                w_d += 1.0;
            } else {
                b_d += 1.0;
            }
        }
    }
    let t = pair_d.len() as f64;
    let mean = pair_d.iter().sum::<f64>() / t;
    let s_d = (pair_d.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / t).sqrt();
    (d_b - d_w) * (w_d * b_d / (t * t)).sqrt() / s_d
}

pub fn naive_pbm(points: &[Vec<f64>], labels: &[usize], c: usize) -> f64 {
    let m = members(labels, c);
    let n = points.len();
    let all: Vec<usize> = (0..n).collect();
    let grand = mean_of(points, &all);
    let centroids: Vec<Vec<f64>> = m.iter().map(|idx| mean_of(points, idx)).collect();
    let e_1 = (0..n).map(|i| dist(&points[i], &grand)).sum::<f64>() / n as f64;
    let e_k = (0..n).map(|i| dist(&points[i], &centroids[labels[i]])).sum::<f64>() / n as f64;
    let mut d_k = 0.0f64;
    for p in 0..c {
        for q in 0..c {
            d_k = d_k.max(dist(&centroids[p], &centroids[q]));
        }
    }
    let inner = e_1 / e_k * d_k / c as f64;
    inner * inner
}

/// Traces of the explicit scatter matrices.
pub fn naive_vrc(points: &[Vec<f64>], labels: &[usize], c: usize) -> f64 {
    let m = members(labels, c);
    let n = points.len();
    let h = points[0].len();
    let all: Vec<usize> = (0..n).collect();
    let grand = mean_of(points, &all);
    let mut w = vec![vec![0.0; h]; h];
    let mut b = vec![vec![0.0; h]; h];
    for idx in &m {
        let mu = mean_of(points, idx);
        for &i in idx {
            for r in 0..h {
                for s in 0..h {
                    w[r][s] += (points[i][r] - mu[r]) * (points[i][s] - mu[s]);
                }
            }
        }
        for r in 0..h {
            for s in 0..h {
                b[r][s] += idx.len() as f64 * (mu[r] - grand[r]) * (mu[s] - grand[s]);
            }
        }
    }
    let tr_w: f64 = (0..h).map(|r| w[r][r]).sum();
    let tr_b: f64 = (0..h).map(|r| b[r][r]).sum();
    (n - c) as f64 / (c - 1) as f64 * tr_b / tr_w / h as f64
}

/// Dense 0/1 rows of a sparse code.
pub fn expand(code: &SparseCode) -> Vec<Vec<f64>> {
    let mut rows = vec![Vec::new(); code.n()];
    for block in code.blocks() {
        for (i, row) in rows.iter_mut().enumerate() {
            for &a in block.row(i) {
                let mut onehot = vec![0.0; block.k() as usize];
                onehot[a as usize] = 1.0;
                row.extend(onehot);
            }
        }
    }
    rows
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The linear-kernel discrepancy by explicit double sums over binary vectors.
pub fn dense_mmd(codes: &[&SparseCode], include_constant: bool) -> Vec<f64> {
    let z_count = codes.len() as f64;
    let dense: Vec<Vec<Vec<f64>>> = codes.iter().map(|c| expand(c)).collect();
    let n = dense[0].len();
    let nf = n as f64;
    let meta: Vec<Vec<f64>> = (0..n).map(|i| dense.iter().flat_map(|d| d[i].clone()).collect()).collect();
    let mut first = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                first += dotv(&meta[i], &meta[j]);
            }
        }
    }
    first /= z_count * nf * (nf - 1.0);
    (0..codes.len())
        .map(|z| {
            let mut within = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        within += dotv(&dense[z][i], &dense[z][j]);
                    }
                }
            }
            within /= nf * (nf - 1.0);
            let mut cross = 0.0;
            for u in 0..codes.len() {
                for i in 0..n {
                    for j in 0..n {
                        cross += dotv(&dense[u][i], &dense[z][j]);
                    }
                }
            }
            cross *= 2.0 / (z_count * nf * nf);
            (if include_constant { first } else { 0.0 }) + within - cross
        })
        .collect()
}

/// Cyclic Jacobi eigen-decomposition; eigenvalues descending, eigenvectors
/// as columns of the returned matrix (`vecs[row][col]`).
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = a.len();
    let mut v = vec![vec![0.0; m]; m];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..m).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-26 * scale {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..m {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = cs * vp - sn * vq;
                    row[q] = sn * vp + cs * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..m).map(|r| order.iter().map(|&col| v[r][col]).collect()).collect();
    (values, vecs)
}

/// Covariance PCA of dense rows, projected onto the top `h` axes.
/// All-zero columns are dropped first; they carry no variance.
pub fn dense_pca(rows: &[Vec<f64>], h: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let used: Vec<usize> = (0..rows[0].len()).filter(|&j| rows.iter().any(|r| r[j] != 0.0)).collect();
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| used.iter().map(|&j| r[j]).collect()).collect();
    let rows = rows.as_slice();
    let n = rows.len();
    let d = rows[0].len();
    let all: Vec<usize> = (0..n).collect();
    let mu = mean_of(rows, &all);
    let centered: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mu).map(|(x, m)| x - m).collect()).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in &centered {
        for s in 0..d {
            if r[s] == 0.0 {
                continue;
            }
            for t in 0..d {
                cov[s][t] += r[s] * r[t] / (n - 1) as f64;
            }
        }
    }
    let (values, vecs) = jacobi_eigen(cov);
    let proj = centered.iter().map(|r| (0..h).map(|j| (0..d).map(|s| r[s] * vecs[s][j]).sum()).collect()).collect();
    (proj, values)
}

pub fn pairwise(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            out.push(dist(&rows[i], &rows[j]));
        }
    }
    out
}

/// Straight-from-definition agglomeration: every step recomputes all
/// cluster-to-cluster linkages from the original point distances.
pub fn naive_ahc(points: &[Vec<f64>], linkage: &str, c: usize) -> Vec<usize> {
    let n = points.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let cross = |a: &[usize], b: &[usize]| -> Vec<f64> {
        a.iter().flat_map(|&i| b.iter().map(move |&j| dist(&points[i], &points[j]))).collect()
    };
    let link = |a: &[usize], b: &[usize]| -> f64 {
        match linkage {
            "single" => cross(a, b).into_iter().fold(f64::INFINITY, f64::min),
            "complete" => cross(a, b).into_iter().fold(0.0, f64::max),
            "average" => cross(a, b).iter().sum::<f64>() / (a.len() * b.len()) as f64,
            "ward" => {
                let (ca, cb) = (mean_of(points, a), mean_of(points, b));
                let sq: f64 = ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum();
                2.0 * (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64 * sq
            }
            other => panic!("unknown linkage {other}"),
        }
    };
    // Clusters stay sorted by lowest member, so list order matches slot order.
    while clusters.len() > c {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let v = link(&clusters[a], &clusters[b]);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        let moved = clusters.remove(best.2);
        clusters[best.1].extend(moved);
    }
    let mut labels = vec![0; n];
    for (l, m) in clusters.iter().enumerate() {
        for &i in m {
            labels[i] = l;
        }
    }
    labels
}

/// Best accuracy over every relabeling of `pred`.
pub fn brute_acc(pred: &[usize], truth: &[usize]) -> f64 {
    let m = pred.iter().chain(truth).max().unwrap() + 1;
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best = 0;
    loop {
        let hits = pred.iter().zip(truth).filter(|(&p, &t)| perm[p] == t).count();
        best = best.max(hits);
        let Some(i) = (0..m.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else { break };
        let j = (i + 1..m).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
    best as f64 / pred.len() as f64
}

/// Random one-block code with every centroid index below `k`.
pub fn random_block(n: usize, v: usize, k: u32, rng: &mut impl rand::Rng) -> CodeBlock {
    let a = (0..n * v).map(|_| rng.random_range(0..k)).collect();
    CodeBlock::new(n, v, k, a).unwrap()
}

pub fn code_strategy(
    n: std::ops::Range<usize>,
    v: std::ops::Range<usize>,
    k: std::ops::Range<u32>,
) -> impl Strategy<Value = SparseCode> {
    (n, v, k).prop_flat_map(|(n, v, k)| {
        prop::collection::vec(0..k, n * v).prop_map(move |a| SparseCode::single(CodeBlock::new(n, v, k, a).unwrap()))
    })
}

/// Points with labels covering every one of `c` clusters.
pub fn labeled_points(rng: &mut impl rand::Rng, n: usize, d: usize, c: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let points = (0..n).map(|_| (0..d).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
    let mut labels: Vec<usize> = (0..n).map(|i| if i < c { i } else { rng.random_range(0..c) }).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    (points, labels)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// A dimension near `cap` whose eigenvalue is clearly separated from the
/// next one, so the truncated subspace is unique. `values` may be shorter
/// than `max` when the dense oracle dropped all-zero columns.
pub fn gapped_dim(values: &[f64], cap: usize, max: usize) -> usize {
    let max = max.min(values.len());
    let cap = cap.min(max);
    let gapped = |h: &usize| values[h - 1] - values.get(*h).copied().unwrap_or(0.0) > 1e-6 * values[0];
    (1..=cap).rev().find(gapped).or_else(|| (cap..=max).find(gapped)).unwrap_or(max)
}
