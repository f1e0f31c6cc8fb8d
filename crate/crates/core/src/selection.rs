//! Ensemble selection: weight every base model, keep the top `B` and reduce
//! their concatenated outputs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Embedding, LabelVector, Metric, SparseCode};
use crate::divergence::{mmd_scores_codes, mmd_scores_embedded, mmd_weights};
use crate::ensemble::{meta_embedding, MbnEnsemble};
use crate::error::{MbnError, Result};
use crate::evaluation::{ahc, AhcConfig, Linkage};
use crate::reduction::{default_dim, gram_embedding, pca_sparse};
use crate::validity::{evaluate, vrc_with_dim, Criterion, CriterionScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionMode {
    #[serde(rename = "SO")]
    So,
    #[serde(rename = "SD")]
    Sd,
    #[serde(rename = "rSO")]
    Rso,
}

impl SelectionMode {
    pub fn default_b(self) -> usize {
        match self {
            SelectionMode::So | SelectionMode::Rso => 3,
            SelectionMode::Sd => 10,
        }
    }
}

impl std::str::FromStr for SelectionMode {
    type Err = MbnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "so" => Ok(SelectionMode::So),
            "sd" => Ok(SelectionMode::Sd),
            "rso" => Ok(SelectionMode::Rso),
            other => Err(MbnError::Config(format!("unknown selection mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub mode: SelectionMode,
    /// Used by SO and rSO only.
    pub criterion: Criterion,
    /// Number of models kept; `None` takes the mode's default.
    pub b: Option<usize>,
    /// Class count, required by SO and rSO.
    pub c: Option<usize>,
    /// Reduction dimension; `None` means `min(100, n - 1)`.
    pub embed_dim: Option<usize>,
    pub linkage: Linkage,
    /// Metric AHC uses to produce reference labels.
    pub metric: Metric,
    /// SO/rSO: score criteria in the sparse space instead of on `y_z`.
    pub score_sparse: bool,
    /// SD: compare PCA embeddings instead of sparse codes.
    pub divergence_on_embedding: bool,
    /// SD: keep the term shared by all models in the reported scores.
    pub include_constant: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            mode: SelectionMode::So,
            criterion: Criterion::Vrc,
            b: None,
            c: None,
            embed_dim: None,
            linkage: Linkage::Average,
            metric: Metric::Euclidean,
            score_sparse: false,
            divergence_on_embedding: false,
            include_constant: false,
        }
    }
}

impl SelectionConfig {
    pub fn resolved_b(&self) -> usize {
        self.b.unwrap_or_else(|| self.mode.default_b())
    }

    pub fn validate(&self, models: usize) -> Result<()> {
        let b = self.resolved_b();
        if b == 0 || b > models {
            return Err(MbnError::Config(format!("B must be in [1, {models}], got {b}")));
        }
        if matches!(self.mode, SelectionMode::So | SelectionMode::Rso) {
            match self.c {
                None => return Err(MbnError::Config("selection mode needs the class count c".into())),
                Some(c) if c < 2 => return Err(MbnError::Config(format!("c must be >= 2, got {c}"))),
                _ => {}
            }
        }
        if self.embed_dim == Some(0) {
            return Err(MbnError::Config("embed_dim must be >= 1".into()));
        }
        Ok(())
    }

    fn ahc_config(&self, c: usize) -> AhcConfig {
        AhcConfig { linkage: self.linkage, metric: self.metric, c }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub weights: Vec<f64>,
    /// Model indices, highest weight first.
    pub chosen: Vec<usize>,
    /// Chosen outputs concatenated in ascending model order.
    pub selected_code: SparseCode,
    pub selected_embedding: Embedding,
    pub reference_labels: Option<LabelVector>,
}

/// The `b` largest weights, ties to the lower index. NaN never wins.
pub fn top_b(weights: &[f64], b: usize) -> Vec<usize> {
    let key = |w: f64| if w.is_nan() { f64::NEG_INFINITY } else { w };
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| key(weights[j]).total_cmp(&key(weights[i])).then(i.cmp(&j)));
    order.truncate(b);
    order
}

/// Concatenates the chosen codes in ascending index order and reduces them.
pub fn assemble(codes: &[&SparseCode], chosen: &[usize], embed_dim: usize) -> Result<(SparseCode, Embedding)> {
    let mut ascending = chosen.to_vec();
    ascending.sort_unstable();
    let code = SparseCode::concat(ascending.iter().map(|&z| codes[z]))?;
    let embedding = pca_sparse(&code, embed_dim)?;
    Ok((code, embedding))
}

fn weight_of(score: Result<CriterionScore>) -> Result<f64> {
    match score {
        Ok(s) => Ok(s.value),
        Err(MbnError::CriterionUndefined { .. }) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

fn require_usable(weights: &[f64], criterion: Criterion) -> Result<()> {
    if weights.iter().all(|w| !w.is_finite()) {
        return Err(MbnError::CriterionUndefined {
            criterion: criterion.name().into(),
            reason: "degenerate or undefined on every model".into(),
        });
    }
    Ok(())
}

/// A per-model embedding together with the feature dimension VRC divides by.
struct Scored {
    y: Embedding,
    h: usize,
}

fn model_embedding(code: &SparseCode, dim: usize, sparse_space: bool) -> Result<Scored> {
    if sparse_space {
        // A full-rank Gram embedding preserves all pairwise distances of
        // the binary code.
        let kernel: Vec<f64> = code.gram().into_iter().map(f64::from).collect();
        let (y, _) = gram_embedding(&kernel, code.n(), code.n())?;
        Ok(Scored { y, h: code.implicit_dim() })
    } else {
        let y = pca_sparse(code, dim)?;
        let h = y.dim();
        Ok(Scored { y, h })
    }
}

fn score(criterion: Criterion, labels: &LabelVector, s: &Scored) -> Result<CriterionScore> {
    match criterion {
        Criterion::Vrc => vrc_with_dim(labels, &s.y, s.h),
        other => evaluate(other, labels, &s.y),
    }
}

/// SO weights: every model scored against one fixed labeling.
pub fn so_weights(reference: &LabelVector, models: &[Embedding], criterion: Criterion) -> Result<Vec<f64>> {
    let weights =
        models.par_iter().map(|y| weight_of(evaluate(criterion, reference, y))).collect::<Result<Vec<_>>>()?;
    require_usable(&weights, criterion)?;
    Ok(weights)
}

/// rSO weights: each model's own clustering scored on the reference space.
pub fn rso_weights(
    reference: &Embedding,
    models: &[Embedding],
    criterion: Criterion,
    ahc_cfg: &AhcConfig,
) -> Result<Vec<f64>> {
    let weights = models
        .par_iter()
        .map(|y| {
            let labels = ahc(y, ahc_cfg)?;
            weight_of(evaluate(criterion, &labels, reference))
        })
        .collect::<Result<Vec<_>>>()?;
    require_usable(&weights, criterion)?;
    Ok(weights)
}

fn model_codes(ens: &MbnEnsemble) -> Vec<&SparseCode> {
    (0..ens.len()).map(|z| ens.model_code(z)).collect()
}

fn embed_dim(cfg: &SelectionConfig, ens: &MbnEnsemble) -> usize {
    cfg.embed_dim.unwrap_or_else(|| default_dim(ens.n()))
}

/// Per-model weights, computed once and reusable for any `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub weights: Vec<f64>,
    pub reference_labels: Option<LabelVector>,
}

fn so_model_weights(ens: &MbnEnsemble, cfg: &SelectionConfig, c: usize, dim: usize) -> Result<ModelWeights> {
    let meta = meta_embedding(ens, dim)?;
    let labels = ahc(&meta, &cfg.ahc_config(c))?;
    let weights = model_codes(ens)
        .into_par_iter()
        .map(|code| {
            let s = model_embedding(code, dim, cfg.score_sparse)?;
            weight_of(score(cfg.criterion, &labels, &s))
        })
        .collect::<Result<Vec<_>>>()?;
    require_usable(&weights, cfg.criterion)?;
    Ok(ModelWeights { weights, reference_labels: Some(labels) })
}

fn rso_model_weights(ens: &MbnEnsemble, cfg: &SelectionConfig, c: usize, dim: usize) -> Result<ModelWeights> {
    let meta = meta_embedding(ens, dim)?;
    let models = model_codes(ens).into_par_iter().map(|code| pca_sparse(code, dim)).collect::<Result<Vec<_>>>()?;
    let weights = rso_weights(&meta, &models, cfg.criterion, &cfg.ahc_config(c))?;
    Ok(ModelWeights { weights, reference_labels: None })
}

fn sd_model_weights(ens: &MbnEnsemble, cfg: &SelectionConfig, dim: usize) -> Result<ModelWeights> {
    let codes = model_codes(ens);
    let scores = if cfg.divergence_on_embedding {
        let meta = meta_embedding(ens, dim)?;
        let parts = codes.par_iter().map(|c| pca_sparse(c, dim)).collect::<Result<Vec<_>>>()?;
        mmd_scores_embedded(&meta, &parts)?
    } else {
        mmd_scores_codes(&codes, cfg.include_constant)?
    };
    Ok(ModelWeights { weights: mmd_weights(&scores), reference_labels: None })
}

pub fn model_weights(ens: &MbnEnsemble, cfg: &SelectionConfig) -> Result<ModelWeights> {
    cfg.validate(ens.len())?;
    let dim = embed_dim(cfg, ens);
    match cfg.mode {
        SelectionMode::So => so_model_weights(ens, cfg, cfg.c.expect("validated"), dim),
        SelectionMode::Rso => rso_model_weights(ens, cfg, cfg.c.expect("validated"), dim),
        SelectionMode::Sd => sd_model_weights(ens, cfg, dim),
    }
}

/// Keeps the `B` best models under precomputed weights.
pub fn pick(ens: &MbnEnsemble, cfg: &SelectionConfig, weights: ModelWeights) -> Result<SelectionResult> {
    cfg.validate(ens.len())?;
    if weights.weights.len() != ens.len() {
        return Err(MbnError::DimensionMismatch { expected: ens.len(), got: weights.weights.len() });
    }
    let chosen = top_b(&weights.weights, cfg.resolved_b());
    let (selected_code, selected_embedding) = assemble(&model_codes(ens), &chosen, embed_dim(cfg, ens))?;
    Ok(SelectionResult {
        weights: weights.weights,
        chosen,
        selected_code,
        selected_embedding,
        reference_labels: weights.reference_labels,
    })
}

fn select_as(ens: &MbnEnsemble, cfg: &SelectionConfig, mode: SelectionMode) -> Result<SelectionResult> {
    let cfg = SelectionConfig { mode, ..cfg.clone() };
    let w = model_weights(ens, &cfg)?;
    pick(ens, &cfg, w)
}

pub fn select_so(ens: &MbnEnsemble, cfg: &SelectionConfig) -> Result<SelectionResult> {
    select_as(ens, cfg, SelectionMode::So)
}

pub fn select_rso(ens: &MbnEnsemble, cfg: &SelectionConfig) -> Result<SelectionResult> {
    select_as(ens, cfg, SelectionMode::Rso)
}

pub fn select_sd(ens: &MbnEnsemble, cfg: &SelectionConfig) -> Result<SelectionResult> {
    select_as(ens, cfg, SelectionMode::Sd)
}

pub fn select(ens: &MbnEnsemble, cfg: &SelectionConfig) -> Result<SelectionResult> {
    select_as(ens, cfg, cfg.mode)
}
