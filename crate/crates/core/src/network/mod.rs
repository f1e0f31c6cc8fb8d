//! Multilayer bootstrap network: random-centroid clustering layers stacked
//! with a shrinking number of centroids per clustering.

mod layer;
mod model;

pub use layer::{train_layer, ClusteringUnit, Layer, LayerInput, RowIndex};
pub use model::{encode, train_mbn, MbnModel};

use serde::{Deserialize, Serialize};

use crate::data::Metric;
use crate::error::{MbnError, Result};

/// `floor(x + 0.5)`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbnConfig {
    /// Centroid shrink factor between adjacent layers, in `(0, 1)`.
    pub delta: f64,
    /// Clusterings per layer (`V`).
    pub units_per_layer: usize,
    /// Bottom layer uses `round(bottom_fraction * n)` centroids.
    pub bottom_fraction: f64,
    /// Centroids per clustering at the top layer (`k_o`). Defaults to
    /// `round(1.5 c)` when the class count is known.
    pub top_k: Option<usize>,
    /// Fraction of input coordinates (bottom) or previous clusterings
    /// (upper layers) visible to each clustering.
    pub feature_ratio: f64,
    pub metric: Metric,
    pub seed: u64,
    /// Keep every layer's training code so new data can be encoded later.
    #[serde(default = "default_retain")]
    pub retain_layer_codes: bool,
}

fn default_retain() -> bool {
    true
}

impl Default for MbnConfig {
    fn default() -> Self {
        MbnConfig {
            delta: 0.5,
            units_per_layer: 400,
            bottom_fraction: 0.5,
            top_k: None,
            feature_ratio: 0.5,
            metric: Metric::Euclidean,
            seed: 0,
            retain_layer_codes: true,
        }
    }
}

impl MbnConfig {
    pub fn bottom_k(&self, n: usize) -> usize {
        round_half_up(self.bottom_fraction * n as f64).clamp(1, n.max(1))
    }

    /// `k_o`, falling back to `round(1.5 c)`.
    pub fn resolve_top_k(&self, classes: Option<usize>) -> Result<usize> {
        match (self.top_k, classes) {
            (Some(k), _) => Ok(k),
            (None, Some(c)) => Ok(round_half_up(1.5 * c as f64).max(1)),
            (None, None) => Err(MbnError::Config("top_k must be given when the class count is unknown".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(MbnError::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.units_per_layer == 0 {
            return Err(MbnError::Config("units_per_layer must be >= 1".into()));
        }
        if !(self.feature_ratio > 0.0 && self.feature_ratio <= 1.0) {
            return Err(MbnError::Config(format!("feature_ratio must lie in (0, 1], got {}", self.feature_ratio)));
        }
        if !(self.bottom_fraction > 0.0 && self.bottom_fraction <= 1.0) {
            return Err(MbnError::Config(format!("bottom_fraction must lie in (0, 1], got {}", self.bottom_fraction)));
        }
        if self.top_k == Some(0) {
            return Err(MbnError::Config("top_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Centroid counts per layer: `k_m = round(delta * k_{m-1})`, forced to
/// decrease by at least one, stopping at the first value `<= k_o` which is
/// replaced by `k_o` itself.
pub fn schedule_layers(k1: usize, delta: f64, top_k: usize) -> Result<Vec<usize>> {
    if top_k < 1 || k1 <= top_k {
        return Err(MbnError::Schedule(format!("need k1 > k_o >= 1, got k1={k1}, k_o={top_k}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(MbnError::Schedule(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut ks = vec![k1];
    let mut prev = k1;
    loop {
        let next = round_half_up(delta * prev as f64).min(prev - 1);
        if next <= top_k {
            ks.push(top_k);
            return Ok(ks);
        }
        ks.push(next);
        prev = next;
    }
}
