use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, LabelVector, Metric};
use crate::error::{MbnError, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Parameters of the isotropic Gaussian blob fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobsSpec {
    pub seed: u64,
    pub clusters: usize,
    pub per_cluster: usize,
    pub dims: usize,
    /// Minimum distance between any two centers.
    pub separation: f64,
    /// Per-coordinate standard deviation around each center.
    pub spread: f64,
}

/// Cluster `p` is centered at `p * separation` on the first axis with the
/// remaining coordinates drawn from `[0, separation)`, so centers are
/// pairwise at least `separation` apart. Points are listed cluster by cluster.
pub fn make_blobs(spec: &BlobsSpec) -> Result<Dataset> {
    let BlobsSpec { seed, clusters, per_cluster, dims, separation, spread } = *spec;
    if clusters == 0 || per_cluster == 0 || dims == 0 {
        return Err(MbnError::Config("blobs need clusters, per_cluster and dims >= 1".into()));
    }
    if !(separation > 0.0) || !(spread >= 0.0) {
        return Err(MbnError::Config("blobs need separation > 0 and spread >= 0".into()));
    }
    let mut rng = rng::stream(seed, &[rng::tag::BLOBS]);
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|p| {
            (0..dims).map(|j| if j == 0 { p as f64 * separation } else { rng.random::<f64>() * separation }).collect()
        })
        .collect();
    let noise = Normal::new(0.0, spread).map_err(|e| MbnError::Config(e.to_string()))?;

    let n = clusters * per_cluster;
    let mut data = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for (p, center) in centers.iter().enumerate() {
        for _ in 0..per_cluster {
            for &c in center {
                let x = if spread == 0.0 { c } else { c + noise.sample(&mut rng) };
                data.push(x);
            }
            labels.push(p);
        }
    }
    let features = Matrix::from_vec(n, dims, data)?;
    let labels = LabelVector::new(labels, clusters)?;
    Dataset::new(features, Some(labels), Metric::Euclidean, format!("blobs-c{clusters}-s{seed}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::euclidean;

    fn spec(spread: f64) -> BlobsSpec {
        BlobsSpec { seed: 1, clusters: 2, per_cluster: 5, dims: 2, separation: 10.0, spread }
    }

    #[test]
    fn balanced_and_deterministic() {
        let a = make_blobs(&spec(0.1)).unwrap();
        assert_eq!(a.n(), 10);
        assert_eq!(a.labels.as_ref().unwrap().cluster_sizes(), vec![5, 5]);
        assert_eq!(a, make_blobs(&spec(0.1)).unwrap());
    }

    #[test]
    fn zero_spread_collapses_to_center() {
        let a = make_blobs(&spec(0.0)).unwrap();
        for i in 1..5 {
            assert_eq!(a.features.row(i), a.features.row(0));
        }
        assert!(euclidean(a.features.row(0), a.features.row(5)) >= 10.0);
    }

    #[test]
    fn wide_separation_matches_nearest_center() {
        let s = BlobsSpec { seed: 4, clusters: 4, per_cluster: 30, dims: 3, separation: 100.0, spread: 1.0 };
        let ds = make_blobs(&s).unwrap();
        let labels = ds.labels.as_ref().unwrap().as_slice();
        let centers: Vec<Vec<f64>> = (0..4)
            .map(|p| {
                let rows: Vec<usize> = (0..ds.n()).filter(|&i| labels[i] == p).collect();
                ds.features.select_rows(&rows).column_means()
            })
            .collect();
        for (i, &label) in labels.iter().enumerate() {
            let best = (0..4)
                .min_by(|&a, &b| {
                    euclidean(ds.features.row(i), &centers[a]).total_cmp(&euclidean(ds.features.row(i), &centers[b]))
                })
                .unwrap();
            assert_eq!(best, label);
        }
    }
}
