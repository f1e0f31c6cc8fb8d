//! Experiment runner: repeated seeded runs of a pipeline, parameter sweeps
//! and the files they produce.

mod config;
mod plot;

pub use config::{
    AhcSettings, DataSource, EnsembleSettings, ExperimentConfig, LabelColumn, NetworkSettings, Pipeline, Resolved,
    SelectionSettings,
};
pub use plot::{curve_csv, curve_svg, line_chart, CurveRow, Series, WeightTable};

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{save_json, write_atomic, Dataset, Embedding, LabelVector, SparseCode};
use crate::ensemble::{meta_embedding, train_ensemble, train_single, EnsembleConfig, MbnEnsemble};
use crate::error::{MbnError, Result};
use crate::evaluation::{accuracy, ahc, AhcConfig};
use crate::network::MbnConfig;
use crate::reduction::{pca_fit, pca_sparse, pca_transform, PcaModel};
use crate::selection::{model_weights, pick, ModelWeights, SelectionConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub labeled: bool,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub train: f64,
    pub select: f64,
    pub cluster: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub acc: Option<f64>,
    /// Centroids per clustering at each layer (single-network pipelines).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub layer_sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub deltas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chosen: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model_acc: Option<Vec<f64>>,
    pub embedding_dim: usize,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub pipeline: String,
    pub config: ExperimentConfig,
    pub resolved: Resolved,
    pub dataset: DatasetSummary,
    pub runs: Vec<RunRecord>,
    pub mean_acc: Option<f64>,
    pub std_acc: Option<f64>,
    pub warnings: Vec<String>,
}

impl RunReport {
    /// Copy with every wall-clock field zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> RunReport {
        let mut r = self.clone();
        r.runs.iter_mut().for_each(|run| run.timings = Timings::default());
        r
    }

    pub fn accs(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.acc).collect()
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var =
        if values.len() > 1 { values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Some((mean, var.sqrt()))
}

/// Loads the configured data and applies optional PCA preprocessing,
/// returning the fitted projection so new points can follow it.
pub fn prepare(cfg: &ExperimentConfig) -> Result<(Dataset, Option<PcaModel>)> {
    let data = cfg.data.load()?;
    match cfg.preprocess_pca {
        Some(h) if data.d() > h => {
            let model = pca_fit(&data.features, h)?;
            let reduced = pca_transform(&model, &data.features)?;
            Ok((Dataset::new(reduced.values, data.labels, data.metric, data.name)?, Some(model)))
        }
        _ => Ok((data, None)),
    }
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    prepare(cfg).map(|p| p.0)
}

pub fn network_config(cfg: &ExperimentConfig, res: &Resolved, data: &Dataset, delta: f64, seed: u64) -> MbnConfig {
    MbnConfig {
        delta,
        units_per_layer: res.units_per_layer,
        bottom_fraction: cfg.network.bottom_fraction,
        top_k: Some(res.top_k),
        feature_ratio: res.feature_ratio,
        metric: data.metric,
        seed,
        retain_layer_codes: false,
    }
}

pub fn ensemble_config(cfg: &ExperimentConfig, res: &Resolved, data: &Dataset, seed: u64) -> EnsembleConfig {
    EnsembleConfig {
        models: res.models,
        delta_range: cfg.ensemble.delta_range,
        base: network_config(cfg, res, data, cfg.network.delta, seed),
        seed,
    }
}

/// Everything a run reads but never changes.
struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    res: &'a Resolved,
    data: &'a Dataset,
}

/// Trained state of one run, before the final clustering.
enum Trained {
    Single { code: SparseCode, layer_sizes: Vec<usize> },
    Ensemble(Box<MbnEnsemble>),
}

fn train(ctx: &Ctx, seed: u64) -> Result<Trained> {
    let Ctx { cfg, res, data } = *ctx;
    let pipeline = cfg.pipeline;
    match pipeline {
        Pipeline::MbnDefault | Pipeline::MbnFixedDelta { .. } => {
            let delta = match pipeline {
                Pipeline::MbnFixedDelta { delta } => delta,
                _ => cfg.network.delta,
            };
            let (_, model) = train_single(data, &network_config(cfg, res, data, delta, seed))?;
            Ok(Trained::Single { layer_sizes: model.layer_sizes(), code: model.output_code })
        }
        _ => Ok(Trained::Ensemble(Box::new(train_ensemble(data, &ensemble_config(cfg, res, data, seed))?))),
    }
}

fn cluster_and_score(ctx: &Ctx, y: &Embedding, truth: Option<&LabelVector>) -> Result<Option<f64>> {
    let Ctx { cfg, res, .. } = *ctx;
    let labels = ahc(y, &AhcConfig { linkage: cfg.ahc.linkage, metric: res.ahc_metric, c: res.require_classes()? })?;
    truth.map(|t| accuracy(&labels, t).map(|r| r.acc)).transpose()
}

fn standalone_accs(ctx: &Ctx, ens: &MbnEnsemble, truth: &LabelVector) -> Result<Vec<f64>> {
    (0..ens.len())
        .into_par_iter()
        .map(|z| {
            let y = pca_sparse(ens.model_code(z), ctx.res.embed_dim)?;
            Ok(cluster_and_score(ctx, &y, Some(truth))?.unwrap_or(f64::NAN))
        })
        .collect()
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Runs the final stages for one value of `B` (or none) on a trained state.
fn finish_run(
    ctx: &Ctx,
    trained: &Trained,
    sel: Option<(&SelectionConfig, &ModelWeights)>,
    run: usize,
) -> Result<RunRecord> {
    let Ctx { cfg, res, data } = *ctx;
    let truth = data.labels.as_ref();
    let mut record = RunRecord {
        run,
        seed: res.seeds[run],
        acc: None,
        layer_sizes: None,
        deltas: None,
        weights: None,
        chosen: None,
        model_acc: None,
        embedding_dim: 0,
        timings: Timings::default(),
    };
    let t = Instant::now();
    let y = match trained {
        Trained::Single { code, layer_sizes } => {
            record.layer_sizes = Some(layer_sizes.clone());
            pca_sparse(code, res.embed_dim)?
        }
        Trained::Ensemble(ens) => {
            record.deltas = Some(ens.deltas.clone());
            if cfg.model_acc {
                if let Some(truth) = truth {
                    record.model_acc = Some(standalone_accs(ctx, ens, truth)?);
                }
            }
            match sel {
                None => meta_embedding(ens, res.embed_dim)?,
                Some((scfg, weights)) => {
                    let r = pick(ens, scfg, weights.clone())?;
                    record.weights = Some(r.weights);
                    record.chosen = Some(r.chosen);
                    r.selected_embedding
                }
            }
        }
    };
    record.timings.select = secs(t);
    let t = Instant::now();
    record.embedding_dim = y.dim();
    record.acc = cluster_and_score(ctx, &y, truth)?;
    record.timings.cluster = secs(t);
    Ok(record)
}

fn one_run(ctx: &Ctx, run: usize) -> Result<RunRecord> {
    let t = Instant::now();
    let trained = train(ctx, ctx.res.seeds[run])?;
    let train_time = secs(t);
    let mut rec = match (&trained, ctx.res.selection_config(ctx.cfg, ctx.cfg.pipeline)) {
        (Trained::Ensemble(ens), Some(scfg)) => {
            let t = Instant::now();
            let weights = model_weights(ens, &scfg)?;
            let weigh_time = secs(t);
            let mut rec = finish_run(ctx, &trained, Some((&scfg, &weights)), run)?;
            rec.timings.select += weigh_time;
            rec
        }
        _ => finish_run(ctx, &trained, None, run)?,
    };
    rec.timings.train = train_time;
    Ok(rec)
}

fn summary(data: &Dataset) -> DatasetSummary {
    DatasetSummary { name: data.name.clone(), n: data.n(), d: data.d(), labeled: data.labels.is_some() }
}

fn assemble_report(cfg: &ExperimentConfig, res: Resolved, data: &Dataset, runs: Vec<RunRecord>) -> RunReport {
    let mut warnings = res.warnings.clone();
    if data.labels.is_none() {
        warnings.push("dataset has no labels; ACC omitted".into());
    }
    let accs: Vec<f64> = runs.iter().filter_map(|r| r.acc).collect();
    let stats = mean_std(&accs);
    RunReport {
        schema_version: SCHEMA_VERSION,
        pipeline: cfg.pipeline.to_string(),
        config: cfg.clone(),
        resolved: res,
        dataset: summary(data),
        runs,
        mean_acc: stats.map(|s| s.0),
        std_acc: stats.map(|s| s.1),
        warnings,
    }
}

/// Runs the configured pipeline `runs` times on already prepared data.
pub fn run_on(cfg: &ExperimentConfig, data: &Dataset) -> Result<RunReport> {
    let res = cfg.resolve(data)?;
    let ctx = Ctx { cfg, res: &res, data };
    let runs = (0..cfg.runs).into_par_iter().map(|r| one_run(&ctx, r)).collect::<Result<Vec<_>>>()?;
    Ok(assemble_report(cfg, res, data, runs))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_on(cfg, &prepare_data(cfg)?)
}

/// Weights of the first run, for plotting.
pub fn weight_table(report: &RunReport) -> Option<WeightTable> {
    let first = report.runs.first()?;
    let weights = first.weights.clone()?;
    let name = report.pipeline.split(':').nth(1).map_or("weight", |c| c).to_string();
    Some(WeightTable {
        series: vec![(name, weights)],
        deltas: first.deltas.clone(),
        model_acc: first.model_acc.clone(),
    })
}

pub fn emit_weight_plot(table: &WeightTable, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("weights.csv"), table.to_csv().as_bytes())?;
    write_atomic(&dir.join("weights.svg"), table.to_svg().as_bytes())
}

/// Writes `report.json` and, for selection pipelines, the weight plot.
pub fn write_run_outputs(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_json(report, dir.join("report.json"))?;
    if let Some(table) = weight_table(report) {
        emit_weight_plot(&table, dir)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub accs: Vec<f64>,
    pub mean_acc: Option<f64>,
    pub std_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub schema_version: u32,
    /// `delta` or `B`.
    pub parameter: String,
    pub pipeline: String,
    pub config: ExperimentConfig,
    pub resolved: Resolved,
    pub dataset: DatasetSummary,
    pub points: Vec<CurvePoint>,
    pub warnings: Vec<String>,
}

impl CurveReport {
    pub fn rows(&self) -> Vec<CurveRow> {
        self.points.iter().map(|p| CurveRow { x: p.x, mean: p.mean_acc, std: p.std_acc }).collect()
    }
}

fn point(x: f64, accs: Vec<f64>) -> CurvePoint {
    let stats = mean_std(&accs);
    CurvePoint { x, accs, mean_acc: stats.map(|s| s.0), std_acc: stats.map(|s| s.1) }
}

/// Single-network accuracy at each `delta` of the grid.
pub fn delta_sweep(cfg: &ExperimentConfig, grid: &[f64]) -> Result<CurveReport> {
    if grid.is_empty() {
        return Err(MbnError::Config("delta grid is empty".into()));
    }
    if let Some(d) = grid.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
        return Err(MbnError::Config(format!("delta grid values must lie in (0, 1), got {d}")));
    }
    let data = prepare_data(cfg)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut last = None;
    for &delta in grid {
        let c = ExperimentConfig { pipeline: Pipeline::MbnFixedDelta { delta }, ..cfg.clone() };
        let report = run_on(&c, &data)?;
        points.push(point(delta, report.accs()));
        last = Some(report);
    }
    let last = last.expect("grid is non-empty");
    Ok(CurveReport {
        schema_version: SCHEMA_VERSION,
        parameter: "delta".into(),
        pipeline: "mbn_fixed_delta".into(),
        config: cfg.clone(),
        resolved: last.resolved,
        dataset: last.dataset,
        points,
        warnings: last.warnings,
    })
}

/// Selection accuracy at each `B` of the grid. Every run trains its ensemble
/// and computes model weights once; only the top-`B` cut varies.
pub fn b_sweep(cfg: &ExperimentConfig, grid: &[usize]) -> Result<CurveReport> {
    if cfg.pipeline.selection_mode().is_none() {
        return Err(MbnError::Config(format!("B sweep needs a selection pipeline, got {}", cfg.pipeline)));
    }
    if grid.is_empty() {
        return Err(MbnError::Config("B grid is empty".into()));
    }
    let data = prepare_data(cfg)?;
    let res = cfg.resolve(&data)?;
    if let Some(b) = grid.iter().find(|&&b| b == 0 || b > res.models) {
        return Err(MbnError::Config(format!("B must be in [1, {}], got {b}", res.models)));
    }
    let base_sel = res.selection_config(cfg, cfg.pipeline).expect("selection pipeline");
    let ctx = Ctx { cfg, res: &res, data: &data };
    let per_run: Vec<Vec<f64>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let trained = train(&ctx, res.seeds[run])?;
            let Trained::Ensemble(ens) = &trained else { unreachable!("selection pipelines train ensembles") };
            let weights = model_weights(ens, &SelectionConfig { b: Some(grid[0]), ..base_sel.clone() })?;
            grid.iter()
                .map(|&b| {
                    let scfg = SelectionConfig { b: Some(b), ..base_sel.clone() };
                    let rec = finish_run(&ctx, &trained, Some((&scfg, &weights)), run)?;
                    Ok(rec.acc.unwrap_or(f64::NAN))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let labeled = data.labels.is_some();
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, &b)| point(b as f64, if labeled { per_run.iter().map(|r| r[i]).collect() } else { Vec::new() }))
        .collect();
    let mut warnings = res.warnings.clone();
    if !labeled {
        warnings.push("dataset has no labels; ACC omitted".into());
    }
    Ok(CurveReport {
        schema_version: SCHEMA_VERSION,
        parameter: "B".into(),
        pipeline: cfg.pipeline.to_string(),
        config: cfg.clone(),
        resolved: res,
        dataset: summary(&data),
        points,
        warnings,
    })
}

pub fn write_curve_outputs(report: &CurveReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_json(report, dir.join("report.json"))?;
    let rows = report.rows();
    write_atomic(&dir.join("curve.csv"), curve_csv(&report.parameter, &rows).as_bytes())?;
    let title = format!("{} vs {}", report.pipeline, report.parameter);
    write_atomic(&dir.join("curve.svg"), curve_svg(&title, &report.parameter, &rows).as_bytes())
}
