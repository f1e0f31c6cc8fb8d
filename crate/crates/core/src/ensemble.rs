//! MBN-E: many base networks with random `delta` on one shared bottom layer.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_json, save_json, Dataset, Embedding, SparseCode};
use crate::error::{MbnError, Result};
use crate::matrix::Matrix;
use crate::network::{encode, schedule_layers, train_layer, train_mbn, Layer, LayerInput, MbnConfig, MbnModel};
use crate::reduction::pca_sparse;
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Number of base models (`Z`).
    pub models: usize,
    /// Closed range `delta` is drawn from, uniformly.
    pub delta_range: (f64, f64),
    /// Template for every base model; `delta` and `seed` are overwritten.
    pub base: MbnConfig,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { models: 40, delta_range: (0.05, 0.95), base: MbnConfig::default(), seed: 0 }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models == 0 {
            return Err(MbnError::Config("ensemble needs at least one model".into()));
        }
        let (lo, hi) = self.delta_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(MbnError::Config(format!("delta range must satisfy 0 < lo <= hi < 1, got [{lo}, {hi}]")));
        }
        self.base.validate()
    }
}

/// Counts of layer trainings performed while building an ensemble.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingStats {
    pub bottom_layers_trained: usize,
    pub upper_layers_trained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbnEnsemble {
    pub bottom: Layer,
    pub models: Vec<MbnModel>,
    /// Concatenated top-layer codes of all models, in model order.
    pub meta_code: SparseCode,
    pub deltas: Vec<f64>,
    pub model_seeds: Vec<u64>,
    pub top_k: usize,
    pub stats: TrainingStats,
}

impl MbnEnsemble {
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn n(&self) -> usize {
        self.meta_code.n()
    }

    /// Top-layer code of model `z`.
    pub fn model_code(&self, z: usize) -> &SparseCode {
        &self.models[z].output_code
    }

    /// Meta-code of new points, given the training features the bottom layer
    /// sampled its centroids from.
    pub fn encode_dense(&self, train: &Dataset, new: &Matrix) -> Result<SparseCode> {
        let bottom = SparseCode::single(self.bottom.encode_dense(&train.features, train.metric, new)?);
        let codes = self.models.iter().map(|m| encode(m, &bottom)).collect::<Result<Vec<_>>>()?;
        SparseCode::concat(codes.iter())
    }
}

/// Bottom layer with `round(bottom_fraction * n)` centroids per clustering on
/// the dataset's own metric.
pub fn train_bottom(data: &Dataset, base: &MbnConfig, seed: u64) -> Result<Layer> {
    if data.n() < 4 {
        return Err(MbnError::InvalidDataset(format!("bottom layer needs n >= 4, got {}", data.n())));
    }
    base.validate()?;
    let k = base.bottom_k(data.n());
    let input = LayerInput::Dense { features: &data.features, metric: data.metric };
    train_layer(input, k, base.units_per_layer, base.feature_ratio, rng::derive_seed(seed, &[tag::BOTTOM]))
}

/// A single MBN (bottom layer plus stack) with the configuration's `delta`.
pub fn train_single(data: &Dataset, config: &MbnConfig) -> Result<(Layer, MbnModel)> {
    let top_k = config.resolve_top_k(data.num_classes())?;
    let k1 = config.bottom_k(data.n());
    schedule_layers(k1, config.delta, top_k)?;
    let bottom = train_bottom(data, config, config.seed)?;
    let model_cfg =
        MbnConfig { top_k: Some(top_k), seed: rng::derive_seed(config.seed, &[tag::MODEL, 0]), ..config.clone() };
    let model = train_mbn(&bottom, &model_cfg)?;
    Ok((bottom, model))
}

pub fn sample_deltas(cfg: &EnsembleConfig) -> Vec<f64> {
    let (lo, hi) = cfg.delta_range;
    let mut rng = rng::stream(cfg.seed, &[tag::DELTA]);
    (0..cfg.models).map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) }).collect()
}

pub fn train_ensemble(data: &Dataset, cfg: &EnsembleConfig) -> Result<MbnEnsemble> {
    cfg.validate()?;
    let top_k = cfg.base.resolve_top_k(data.num_classes())?;
    let k1 = cfg.base.bottom_k(data.n());
    if k1 <= top_k {
        return Err(MbnError::Schedule(format!("bottom k1={k1} must exceed k_o={top_k}")));
    }
    let deltas = sample_deltas(cfg);
    let model_seeds: Vec<u64> = (0..cfg.models).map(|z| rng::derive_seed(cfg.seed, &[tag::MODEL, z as u64])).collect();

    let bottom = train_bottom(data, &cfg.base, cfg.seed)?;
    let models = deltas
        .par_iter()
        .zip(model_seeds.par_iter())
        .map(|(&delta, &seed)| {
            let model_cfg = MbnConfig { delta, seed, top_k: Some(top_k), ..cfg.base.clone() };
            train_mbn(&bottom, &model_cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let meta_code = SparseCode::concat(models.iter().map(|m| &m.output_code))?;
    let stats =
        TrainingStats { bottom_layers_trained: 1, upper_layers_trained: models.iter().map(MbnModel::depth).sum() };
    Ok(MbnEnsemble { bottom, models, meta_code, deltas, model_seeds, top_k, stats })
}

/// PCA of the concatenated meta-code.
pub fn meta_embedding(ens: &MbnEnsemble, dim: usize) -> Result<Embedding> {
    pca_sparse(&ens.meta_code, dim)
}

const ENSEMBLE_FORMAT: &str = "mbn-ensemble";
const ENSEMBLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    deltas: Vec<f64>,
    model_seeds: Vec<u64>,
    top_k: usize,
    stats: TrainingStats,
    models: Vec<String>,
}

/// A model without its input, which is the shared bottom code.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    config: MbnConfig,
    layers: Vec<Layer>,
    output_code: SparseCode,
}

/// Writes `manifest.json`, `bottom.json` and one file per model into `dir`.
pub fn save_ensemble(ens: &MbnEnsemble, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    save_json(&ens.bottom, dir.join("bottom.json"))?;
    let mut names = Vec::with_capacity(ens.len());
    for (z, m) in ens.models.iter().enumerate() {
        let name = format!("model-{z:03}.json");
        let file = ModelFile { config: m.config.clone(), layers: m.layers.clone(), output_code: m.output_code.clone() };
        save_json(&file, dir.join(&name))?;
        names.push(name);
    }
    let manifest = Manifest {
        format: ENSEMBLE_FORMAT.into(),
        version: ENSEMBLE_VERSION,
        deltas: ens.deltas.clone(),
        model_seeds: ens.model_seeds.clone(),
        top_k: ens.top_k,
        stats: ens.stats.clone(),
        models: names,
    };
    save_json(&manifest, dir.join("manifest.json"))
}

pub fn load_ensemble(dir: impl AsRef<Path>) -> Result<MbnEnsemble> {
    let dir = dir.as_ref();
    let manifest: Manifest = load_json(dir.join("manifest.json"))?;
    if manifest.format != ENSEMBLE_FORMAT || manifest.version != ENSEMBLE_VERSION {
        return Err(MbnError::Format(format!(
            "unsupported ensemble container {} v{}",
            manifest.format, manifest.version
        )));
    }
    if manifest.models.is_empty()
        || manifest.deltas.len() != manifest.models.len()
        || manifest.model_seeds.len() != manifest.models.len()
    {
        return Err(MbnError::Format("manifest lists inconsistent model counts".into()));
    }
    let bottom: Layer = load_json(dir.join("bottom.json"))?;
    let input = bottom.output()?.clone();
    let mut models = Vec::with_capacity(manifest.models.len());
    for name in &manifest.models {
        if name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(MbnError::Format(format!("model file name '{name}' escapes the ensemble directory")));
        }
        let f: ModelFile = load_json(dir.join(name))?;
        if f.output_code.n() != input.n() {
            return Err(MbnError::Format(format!(
                "{name}: output covers {} points, expected {}",
                f.output_code.n(),
                input.n()
            )));
        }
        models.push(MbnModel { config: f.config, input: input.clone(), layers: f.layers, output_code: f.output_code });
    }
    let meta_code = SparseCode::concat(models.iter().map(|m| &m.output_code))?;
    Ok(MbnEnsemble {
        bottom,
        models,
        meta_code,
        deltas: manifest.deltas,
        model_seeds: manifest.model_seeds,
        top_k: manifest.top_k,
        stats: manifest.stats,
    })
}
