use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{schedule_layers, train_layer, Layer, LayerInput, MbnConfig};
use crate::data::{CodeBlock, SparseCode};
use crate::error::{MbnError, Result};
use crate::rng;

/// A trained stack of sparse layers on top of a (possibly shared) bottom
/// layer. `layers` excludes the bottom layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbnModel {
    pub config: MbnConfig,
    /// Training code of the bottom layer this model was built on.
    pub input: Arc<CodeBlock>,
    pub layers: Vec<Layer>,
    pub output_code: SparseCode,
}

impl MbnModel {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.k).collect()
    }
}

/// Trains the layers above `bottom` following the `delta` schedule.
/// Layer `m` (1-based above the bottom) draws from substream `(seed, m)`.
pub fn train_mbn(bottom: &Layer, config: &MbnConfig) -> Result<MbnModel> {
    config.validate()?;
    let top_k = config.top_k.ok_or_else(|| MbnError::Config("top_k (k_o) is required".into()))?;
    let input = bottom.output()?.clone();
    if input.n() < 2 {
        return Err(MbnError::InvalidDataset("need at least 2 points".into()));
    }
    let schedule = schedule_layers(bottom.k, config.delta, top_k)?;

    let mut layers: Vec<Layer> = Vec::with_capacity(schedule.len() - 1);
    let mut prev = input.clone();
    for (m, &k) in schedule.iter().enumerate().skip(1) {
        let seed = rng::derive_seed(config.seed, &[m as u64]);
        let layer = train_layer(LayerInput::Sparse(&prev), k, config.units_per_layer, config.feature_ratio, seed)?;
        prev = layer.output()?.clone();
        if !config.retain_layer_codes {
            if let Some(last) = layers.last_mut() {
                last.output = None;
            }
        }
        layers.push(layer);
    }
    let output_code = SparseCode::new(vec![prev])?;
    Ok(MbnModel { config: config.clone(), input, layers, output_code })
}

/// Propagates a bottom-layer code of new points through the model.
pub fn encode(model: &MbnModel, bottom_code: &SparseCode) -> Result<SparseCode> {
    if bottom_code.num_blocks() != 1 {
        return Err(MbnError::Shape(format!("expected a single bottom block, got {}", bottom_code.num_blocks())));
    }
    let mut current: Arc<CodeBlock> = bottom_code.blocks()[0].clone();
    let mut train_prev: &Arc<CodeBlock> = &model.input;
    for layer in &model.layers {
        current = Arc::new(layer.encode_sparse(train_prev, &current)?);
        train_prev = layer.output()?;
    }
    SparseCode::new(vec![current])
}
