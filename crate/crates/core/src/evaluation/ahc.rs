use serde::{Deserialize, Serialize};

use crate::data::{Embedding, LabelVector, Metric};
use crate::error::{MbnError, Result};
use crate::matrix::{dot, sq_euclidean};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Complete,
    Single,
    Ward,
}

impl std::str::FromStr for Linkage {
    type Err = MbnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "single" => Ok(Linkage::Single),
            "ward" => Ok(Linkage::Ward),
            other => Err(MbnError::Config(format!("unknown linkage '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AhcConfig {
    pub linkage: Linkage,
    pub metric: Metric,
    /// Number of clusters to stop at.
    pub c: usize,
}

impl AhcConfig {
    pub fn new(c: usize) -> Self {
        AhcConfig { linkage: Linkage::default(), metric: Metric::Euclidean, c }
    }
}

/// Pairwise dissimilarities; squared Euclidean for Ward.
fn dissimilarities(y: &Embedding, metric: Metric, linkage: Linkage) -> Vec<f64> {
    let n = y.n();
    let mut d = vec![0.0; n * n];
    let norms: Vec<f64> = (0..n).map(|i| dot(y.row(i), y.row(i)).sqrt()).collect();
    for i in 0..n {
        for j in i + 1..n {
            let v = match metric {
                Metric::Euclidean => {
                    let s = sq_euclidean(y.row(i), y.row(j));
                    if linkage == Linkage::Ward {
                        s
                    } else {
                        s.sqrt()
                    }
                }
                Metric::Cosine => {
                    let denom = norms[i] * norms[j];
                    let sim = if denom > 0.0 { dot(y.row(i), y.row(j)) / denom } else { 0.0 };
                    let dist = 1.0 - sim;
                    if linkage == Linkage::Ward {
                        dist * dist
                    } else {
                        dist
                    }
                }
            };
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Bottom-up merging until `c` clusters remain.
///
/// Clusters are identified by their lowest member index; at every step the
/// closest pair is merged, ties going to the lexicographically smallest
/// pair. Each active cluster caches its nearest active neighbour among the
/// clusters with a larger index, and only caches touched by a merge are
/// rebuilt. Output labels are numbered by lowest member.
pub fn ahc(y: &Embedding, cfg: &AhcConfig) -> Result<LabelVector> {
    let n = y.n();
    let c = cfg.c;
    if c == 0 {
        return Err(MbnError::Config("AHC needs c >= 1".into()));
    }
    if n < c {
        return Err(MbnError::Config(format!("cannot form {c} clusters from {n} points")));
    }
    let mut d = dissimilarities(y, cfg.metric, cfg.linkage);
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut nn = vec![usize::MAX; n];
    let mut nn_d = vec![f64::INFINITY; n];

    let rebuild = |a: usize, d: &[f64], active: &[bool], nn: &mut [usize], nn_d: &mut [f64]| {
        nn[a] = usize::MAX;
        nn_d[a] = f64::INFINITY;
        for b in a + 1..n {
            if active[b] && d[a * n + b] < nn_d[a] {
                nn_d[a] = d[a * n + b];
                nn[a] = b;
            }
        }
    };
    for a in 0..n {
        rebuild(a, &d, &active, &mut nn, &mut nn_d);
    }

    let mut clusters = n;
    while clusters > c {
        let mut a = usize::MAX;
        for i in 0..n {
            if active[i] && nn[i] != usize::MAX && (a == usize::MAX || nn_d[i] < nn_d[a]) {
                a = i;
            }
        }
        let b = nn[a];
        let d_ab = d[a * n + b];
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let (dka, dkb) = (d[k * n + a], d[k * n + b]);
            let nk = size[k] as f64;
            let merged = match cfg.linkage {
                Linkage::Single => dka.min(dkb),
                Linkage::Complete => dka.max(dkb),
                Linkage::Average => (na * dka + nb * dkb) / (na + nb),
                Linkage::Ward => ((na + nk) * dka + (nb + nk) * dkb - nk * d_ab) / (na + nb + nk),
            };
            d[k * n + a] = merged;
            d[a * n + k] = merged;
        }
        active[b] = false;
        size[a] += size[b];
        let moved = std::mem::take(&mut members[b]);
        for &p in &moved {
            owner[p] = a;
        }
        members[a].extend(moved);
        clusters -= 1;

        rebuild(a, &d, &active, &mut nn, &mut nn_d);
        for k in 0..b {
            if !active[k] || k == a {
                continue;
            }
            if nn[k] == a || nn[k] == b {
                rebuild(k, &d, &active, &mut nn, &mut nn_d);
            } else if k < a {
                let dk = d[k * n + a];
                if dk < nn_d[k] || (dk == nn_d[k] && a < nn[k]) {
                    nn[k] = a;
                    nn_d[k] = dk;
                }
            }
        }
    }

    let mut label_of_slot = vec![usize::MAX; n];
    let mut next = 0;
    let labels = owner
        .iter()
        .map(|&slot| {
            if label_of_slot[slot] == usize::MAX {
                label_of_slot[slot] = next;
                next += 1;
            }
            label_of_slot[slot]
        })
        .collect();
    LabelVector::new(labels, c)
}
