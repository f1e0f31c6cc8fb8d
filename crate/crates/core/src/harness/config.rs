use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, make_blobs, BlobsSpec, CsvOptions, Dataset, Metric};
use crate::error::{MbnError, Result};
use crate::evaluation::Linkage;
use crate::network::round_half_up;
use crate::reduction::default_dim;
use crate::rng::{derive_seed, tag};
use crate::selection::{SelectionConfig, SelectionMode};
use crate::validity::Criterion;

/// Which column of a CSV holds class labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LabelColumnRepr", into = "LabelColumnRepr")]
pub enum LabelColumn {
    Index(usize),
    Last,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelColumnRepr {
    Index(usize),
    Name(String),
}

impl TryFrom<LabelColumnRepr> for LabelColumn {
    type Error = String;

    fn try_from(r: LabelColumnRepr) -> std::result::Result<Self, String> {
        match r {
            LabelColumnRepr::Index(i) => Ok(LabelColumn::Index(i)),
            LabelColumnRepr::Name(s) => s.parse().map_err(|e: MbnError| e.to_string()),
        }
    }
}

impl From<LabelColumn> for LabelColumnRepr {
    fn from(c: LabelColumn) -> Self {
        match c {
            LabelColumn::Index(i) => LabelColumnRepr::Index(i),
            LabelColumn::Last => LabelColumnRepr::Name("last".into()),
        }
    }
}

impl std::str::FromStr for LabelColumn {
    type Err = MbnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" => Ok(LabelColumn::Last),
            _ => s
                .parse()
                .map(LabelColumn::Index)
                .map_err(|_| MbnError::Config(format!("label column must be an index or 'last', got '{s}'"))),
        }
    }
}

fn comma() -> char {
    ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        label_column: Option<LabelColumn>,
        #[serde(default = "comma")]
        delimiter: char,
        #[serde(default)]
        has_header: bool,
        #[serde(default)]
        metric: Metric,
    },
    Blobs(BlobsSpec),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Blobs(BlobsSpec { seed: 0, clusters: 5, per_cluster: 100, dims: 10, separation: 20.0, spread: 1.0 })
    }
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Blobs(spec) => make_blobs(spec),
            DataSource::Csv { path, label_column, delimiter, has_header, metric } => {
                if !delimiter.is_ascii() {
                    return Err(MbnError::Config(format!("delimiter must be ASCII, got '{delimiter}'")));
                }
                let delimiter = *delimiter as u8;
                let label_column = match label_column {
                    None => None,
                    Some(LabelColumn::Index(i)) => Some(*i),
                    Some(LabelColumn::Last) => Some(count_columns(path, delimiter)?.saturating_sub(1)),
                };
                load_csv(path, &CsvOptions { label_column, delimiter, has_header: *has_header, metric: *metric })
            }
        }
    }
}

fn count_columns(path: &Path, delimiter: u8) -> Result<usize> {
    let mut reader =
        ::csv::ReaderBuilder::new().has_headers(false).delimiter(delimiter).from_path(path).map_err(|e| {
            match e.into_kind() {
                ::csv::ErrorKind::Io(io) => MbnError::Io(io),
                other => MbnError::Format(format!("{other:?}")),
            }
        })?;
    let mut record = ::csv::StringRecord::new();
    match reader.read_record(&mut record) {
        Ok(true) => Ok(record.len()),
        Ok(false) => Err(MbnError::InvalidDataset(format!("{} is empty", path.display()))),
        Err(e) => Err(MbnError::Parse { row: 1, message: e.to_string() }),
    }
}

/// The method run on the data. Parsed from `name` or `name:arg` on the
/// command line, e.g. `mbn_so:VRC` or `mbn_fixed_delta:0.9`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pipeline {
    #[default]
    MbnDefault,
    MbnFixedDelta {
        delta: f64,
    },
    MbnE,
    MbnSo {
        criterion: Criterion,
    },
    MbnSd,
    MbnRso {
        criterion: Criterion,
    },
}

impl Pipeline {
    pub fn selection_mode(self) -> Option<SelectionMode> {
        match self {
            Pipeline::MbnSo { .. } => Some(SelectionMode::So),
            Pipeline::MbnSd => Some(SelectionMode::Sd),
            Pipeline::MbnRso { .. } => Some(SelectionMode::Rso),
            _ => None,
        }
    }

    pub fn is_ensemble(self) -> bool {
        !matches!(self, Pipeline::MbnDefault | Pipeline::MbnFixedDelta { .. })
    }

    fn criterion(self) -> Criterion {
        match self {
            Pipeline::MbnSo { criterion } | Pipeline::MbnRso { criterion } => criterion,
            _ => Criterion::Vrc,
        }
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pipeline::MbnDefault => write!(f, "mbn_default"),
            Pipeline::MbnFixedDelta { delta } => write!(f, "mbn_fixed_delta:{delta}"),
            Pipeline::MbnE => write!(f, "mbn_e"),
            Pipeline::MbnSo { criterion } => write!(f, "mbn_so:{criterion}"),
            Pipeline::MbnSd => write!(f, "mbn_sd"),
            Pipeline::MbnRso { criterion } => write!(f, "mbn_rso:{criterion}"),
        }
    }
}

impl std::str::FromStr for Pipeline {
    type Err = MbnError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let criterion = || arg.map_or(Ok(Criterion::Vrc), str::parse);
        match (name.to_ascii_lowercase().as_str(), arg) {
            ("mbn_default", None) => Ok(Pipeline::MbnDefault),
            ("mbn_e", None) => Ok(Pipeline::MbnE),
            ("mbn_sd", None) => Ok(Pipeline::MbnSd),
            ("mbn_so", _) => Ok(Pipeline::MbnSo { criterion: criterion()? }),
            ("mbn_rso", _) => Ok(Pipeline::MbnRso { criterion: criterion()? }),
            ("mbn_fixed_delta", Some(d)) => d
                .parse()
                .map(|delta| Pipeline::MbnFixedDelta { delta })
                .map_err(|_| MbnError::Config(format!("bad delta '{d}'"))),
            _ => Err(MbnError::Config(format!("unknown pipeline '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSettings {
    pub units_per_layer: usize,
    pub bottom_fraction: f64,
    pub delta: f64,
    pub top_k: Option<usize>,
    /// Defaults to 0.5 when features are PCA-preprocessed, 1.0 otherwise.
    pub feature_ratio: Option<f64>,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        NetworkSettings { units_per_layer: 400, bottom_fraction: 0.5, delta: 0.5, top_k: None, feature_ratio: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSettings {
    pub models: usize,
    pub delta_range: (f64, f64),
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        EnsembleSettings { models: 40, delta_range: (0.05, 0.95) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSettings {
    pub b: Option<usize>,
    pub embed_dim: Option<usize>,
    pub score_sparse: bool,
    pub divergence_on_embedding: bool,
    pub include_constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AhcSettings {
    pub linkage: Linkage,
    /// Defaults to the dataset's metric.
    pub metric: Option<Metric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub pipeline: Pipeline,
    pub runs: usize,
    /// Master seed; run `r` uses a seed derived from it unless `seeds` is set.
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    /// Class count; taken from the labels when absent.
    pub classes: Option<usize>,
    /// Reduce the input features to this many principal components first.
    pub preprocess_pca: Option<usize>,
    pub network: NetworkSettings,
    pub ensemble: EnsembleSettings,
    pub selection: SelectionSettings,
    pub ahc: AhcSettings,
    /// Scales `units_per_layer` and `models` down, in `(0, 1]`.
    pub budget: f64,
    /// Also report the accuracy of every base model on its own.
    pub model_acc: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::default(),
            pipeline: Pipeline::default(),
            runs: 5,
            seed: 0,
            seeds: None,
            classes: None,
            preprocess_pca: None,
            network: NetworkSettings::default(),
            ensemble: EnsembleSettings::default(),
            selection: SelectionSettings::default(),
            ahc: AhcSettings::default(),
            budget: 1.0,
            model_acc: false,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads TOML or JSON, chosen by file extension.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| MbnError::Config(e.to_string())),
            Some("toml") => toml::from_str(&text).map_err(|e| MbnError::Config(e.to_string())),
            _ => Err(MbnError::Config(format!("config must be .toml or .json: {}", path.display()))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(MbnError::Config("runs must be >= 1".into()));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.runs {
                return Err(MbnError::Config(format!("{} seeds given for {} runs", seeds.len(), self.runs)));
            }
        }
        if !(self.budget > 0.0 && self.budget <= 1.0) {
            return Err(MbnError::Config(format!("budget must lie in (0, 1], got {}", self.budget)));
        }
        if self.preprocess_pca == Some(0) {
            return Err(MbnError::Config("preprocess_pca must be >= 1".into()));
        }
        if let Pipeline::MbnFixedDelta { delta } = self.pipeline {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(MbnError::Config(format!("delta must lie in (0, 1), got {delta}")));
            }
        }
        Ok(())
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        match &self.seeds {
            Some(s) => s[run],
            None => derive_seed(self.seed, &[tag::RUN, run as u64]),
        }
    }

    /// Fills every default that depends on the data and applies the budget.
    pub fn resolve(&self, data: &Dataset) -> Result<Resolved> {
        self.validate()?;
        let classes = self.classes.or_else(|| data.num_classes());
        if let Some(c) = classes {
            if c < 1 || c > data.n() {
                return Err(MbnError::Config(format!("classes must lie in [1, {}], got {c}", data.n())));
            }
        }
        let top_k = match (self.network.top_k, classes) {
            (Some(k), _) => k,
            (None, Some(c)) => round_half_up(1.5 * c as f64).max(1),
            (None, None) => {
                return Err(MbnError::Config(
                    "class count unknown: give `classes`, `network.top_k` or a label column".into(),
                ))
            }
        };
        let scale = |x: usize| round_half_up(x as f64 * self.budget).max(1);
        let models = scale(self.ensemble.models);
        let mut warnings = Vec::new();
        let b = match (self.pipeline.selection_mode(), self.selection.b) {
            (None, _) => None,
            (Some(_), Some(b)) if b == 0 || b > models => {
                return Err(MbnError::Config(format!("B must be in [1, {models}], got {b}")));
            }
            (Some(_), Some(b)) => Some(b),
            (Some(mode), None) => {
                let b = mode.default_b();
                if b > models {
                    warnings.push(format!("default B={b} exceeds the {models} models; using B={models}"));
                }
                Some(b.min(models))
            }
        };
        Ok(Resolved {
            classes,
            units_per_layer: scale(self.network.units_per_layer),
            models,
            top_k,
            feature_ratio: self.network.feature_ratio.unwrap_or(if self.preprocess_pca.is_some() { 0.5 } else { 1.0 }),
            b,
            embed_dim: self.selection.embed_dim.unwrap_or_else(|| default_dim(data.n())),
            ahc_metric: self.ahc.metric.unwrap_or(data.metric),
            seeds: (0..self.runs).map(|r| self.run_seed(r)).collect(),
            warnings,
        })
    }
}

/// Effective parameters of an experiment after defaults and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub classes: Option<usize>,
    pub units_per_layer: usize,
    pub models: usize,
    pub top_k: usize,
    pub feature_ratio: f64,
    pub b: Option<usize>,
    pub embed_dim: usize,
    pub ahc_metric: Metric,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl Resolved {
    pub fn require_classes(&self) -> Result<usize> {
        self.classes.ok_or_else(|| MbnError::Config("class count unknown: give `classes` or a label column".into()))
    }

    pub fn selection_config(&self, cfg: &ExperimentConfig, pipeline: Pipeline) -> Option<SelectionConfig> {
        let mode = pipeline.selection_mode()?;
        Some(SelectionConfig {
            mode,
            criterion: pipeline.criterion(),
            b: self.b,
            c: self.classes,
            embed_dim: Some(self.embed_dim),
            linkage: cfg.ahc.linkage,
            metric: self.ahc_metric,
            score_sparse: cfg.selection.score_sparse,
            divergence_on_embedding: cfg.selection.divergence_on_embedding,
            include_constant: cfg.selection.include_constant,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipeline_names_round_trip() {
        for s in ["mbn_default", "mbn_e", "mbn_sd", "mbn_so:PBM", "mbn_rso:SWC", "mbn_fixed_delta:0.9"] {
            let p: Pipeline = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert_eq!("mbn_so".parse::<Pipeline>().unwrap(), Pipeline::MbnSo { criterion: Criterion::Vrc });
        assert!("mbn_fixed_delta".parse::<Pipeline>().is_err());
        assert!("nope".parse::<Pipeline>().is_err());
    }

    #[test]
    fn toml_config_with_defaults() {
        let text = r#"
            runs = 2
            [data]
            kind = "csv"
            path = "x.csv"
            label_column = "last"
            [pipeline]
            kind = "mbn_so"
            criterion = "PB"
            [network]
            units_per_layer = 50
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.runs, 2);
        assert_eq!(cfg.pipeline, Pipeline::MbnSo { criterion: Criterion::Pb });
        assert_eq!(cfg.network.delta, 0.5);
        assert_eq!(cfg.ensemble.models, 40);
        match cfg.data {
            DataSource::Csv { label_column, delimiter, .. } => {
                assert_eq!(label_column, Some(LabelColumn::Last));
                assert_eq!(delimiter, ',');
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("rnus = 3").is_err());
    }

    #[test]
    fn budget_scales_models_and_units() {
        let data =
            make_blobs(&BlobsSpec { seed: 0, clusters: 2, per_cluster: 10, dims: 2, separation: 10.0, spread: 1.0 })
                .unwrap();
        let cfg = ExperimentConfig { budget: 0.1, pipeline: Pipeline::MbnSd, ..Default::default() };
        let r = cfg.resolve(&data).unwrap();
        assert_eq!((r.units_per_layer, r.models, r.b), (40, 4, Some(4)));
        assert_eq!(r.warnings.len(), 1);
        let explicit = ExperimentConfig { selection: SelectionSettings { b: Some(10), ..Default::default() }, ..cfg };
        assert!(explicit.resolve(&data).is_err());
    }

    #[test]
    fn run_seeds_are_distinct_and_replayable() {
        let cfg = ExperimentConfig::default();
        let seeds: Vec<u64> = (0..5).map(|r| cfg.run_seed(r)).collect();
        let mut uniq = seeds.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), 5);
        let replay = ExperimentConfig { runs: 1, seeds: Some(vec![seeds[3]]), ..cfg };
        assert_eq!(replay.run_seed(0), seeds[3]);
    }
}
