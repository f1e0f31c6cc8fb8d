use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use mbn::data::{load_csv, save_code, save_json, write_csv, CsvOptions, Dataset, LabelVector, Metric, SparseCode};
use mbn::ensemble::{load_ensemble, save_ensemble, train_ensemble, train_single, MbnEnsemble};
use mbn::evaluation::{accuracy, ahc, AhcConfig, Linkage};
use mbn::harness::{
    b_sweep, delta_sweep, emit_weight_plot, ensemble_config, network_config, prepare, run_experiment,
    write_curve_outputs, write_run_outputs, DataSource, ExperimentConfig, LabelColumn, Pipeline, WeightTable,
};
use mbn::network::encode;
use mbn::reduction::pca_transform;
use mbn::selection::select;
use mbn::{MbnError, Result};

#[derive(Parser)]
#[command(name = "mbn", version, about = "Multilayer bootstrap networks, MBN-E ensembles and ensemble selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pipeline several times and report clustering accuracy.
    Run(Common),
    /// Accuracy of a single network over a grid of delta values.
    SweepDelta {
        #[command(flatten)]
        common: Common,
        /// Comma-separated delta values in (0, 1).
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
    },
    /// Accuracy of a selection pipeline over a grid of B values.
    SweepB {
        #[command(flatten)]
        common: Common,
        /// Comma-separated B values in [1, Z].
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<usize>,
    },
    /// Train (or load) a network or ensemble and write its sparse code.
    Encode(EncodeArgs),
    /// Train (or load) an ensemble and select base models.
    Select {
        #[command(flatten)]
        common: Common,
        /// Use a saved ensemble instead of training one.
        #[arg(long)]
        ensemble: Option<PathBuf>,
    },
    /// Clustering accuracy of predicted labels, or of AHC on an embedding.
    Eval(EvalArgs),
}

/// Options shared by every training command; each overrides the config file.
#[derive(Args)]
struct Common {
    /// TOML or JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV file with one point per row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Label column index, or `last`.
    #[arg(long)]
    label_column: Option<LabelColumn>,
    #[arg(long)]
    delimiter: Option<char>,
    /// The CSV starts with a header row.
    #[arg(long)]
    header: bool,
    #[arg(long)]
    metric: Option<Metric>,
    /// e.g. mbn_default, mbn_fixed_delta:0.9, mbn_e, mbn_so:VRC, mbn_sd, mbn_rso:PB.
    #[arg(long)]
    pipeline: Option<Pipeline>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    classes: Option<usize>,
    /// Fraction in (0, 1] applied to the clusterings per layer and to Z.
    #[arg(long)]
    budget: Option<f64>,
    /// Clusterings per layer (V).
    #[arg(long)]
    units: Option<usize>,
    /// Base models (Z).
    #[arg(long)]
    models: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    feature_ratio: Option<f64>,
    /// Selected base models (B).
    #[arg(long = "b")]
    b: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    linkage: Option<Linkage>,
    /// Reduce input features to this many principal components.
    #[arg(long)]
    preprocess_pca: Option<usize>,
    /// Also score every base model on its own.
    #[arg(long)]
    model_acc: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    common: Common,
    /// Load a saved ensemble instead of training one.
    #[arg(long, conflicts_with = "save_ensemble")]
    ensemble: Option<PathBuf>,
    /// Save the trained ensemble to this directory.
    #[arg(long)]
    save_ensemble: Option<PathBuf>,
    /// Encode the points of this CSV instead of the training data.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Label column of the input CSV, dropped before encoding.
    #[arg(long)]
    input_label_column: Option<usize>,
    /// Destination of the code JSON.
    #[arg(long)]
    code: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth labels, one per line.
    #[arg(long)]
    truth: PathBuf,
    /// Predicted labels, one per line.
    #[arg(long, required_unless_present = "embedding", conflicts_with = "embedding")]
    pred: Option<PathBuf>,
    /// Embedding CSV to cluster with AHC first.
    #[arg(long, requires = "classes")]
    embedding: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long, default_value = "average")]
    linkage: Linkage,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_path(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.data {
            match &mut cfg.data {
                DataSource::Csv { path: p, .. } => *p = path.clone(),
                other => {
                    *other = DataSource::Csv {
                        path: path.clone(),
                        label_column: None,
                        delimiter: ',',
                        has_header: false,
                        metric: Metric::Euclidean,
                    }
                }
            }
        }
        let csv_flags = self.label_column.is_some() || self.delimiter.is_some() || self.header || self.metric.is_some();
        match &mut cfg.data {
            DataSource::Csv { label_column, delimiter, has_header, metric, .. } => {
                if self.label_column.is_some() {
                    *label_column = self.label_column;
                }
                if let Some(d) = self.delimiter {
                    *delimiter = d;
                }
                *has_header |= self.header;
                if let Some(m) = self.metric {
                    *metric = m;
                }
            }
            DataSource::Blobs(_) if csv_flags => {
                return Err(MbnError::Config("CSV options given without a CSV data source".into()));
            }
            DataSource::Blobs(_) => {}
        }
        macro_rules! set {
            ($flag:expr => $($field:tt)+) => {
                if let Some(v) = $flag {
                    cfg.$($field)+ = v;
                }
            };
        }
        set!(self.pipeline => pipeline);
        set!(self.runs => runs);
        set!(self.seed => seed);
        set!(self.budget => budget);
        set!(self.units => network.units_per_layer);
        set!(self.models => ensemble.models);
        set!(self.delta => network.delta);
        set!(self.linkage => ahc.linkage);
        if self.runs.is_some() && cfg.seeds.as_ref().is_some_and(|s| s.len() != cfg.runs) {
            cfg.seeds = None;
        }
        for (flag, field) in [
            (self.classes, &mut cfg.classes),
            (self.top_k, &mut cfg.network.top_k),
            (self.b, &mut cfg.selection.b),
            (self.embed_dim, &mut cfg.selection.embed_dim),
            (self.preprocess_pca, &mut cfg.preprocess_pca),
        ] {
            if flag.is_some() {
                *field = flag;
            }
        }
        if self.feature_ratio.is_some() {
            cfg.network.feature_ratio = self.feature_ratio;
        }
        cfg.model_acc |= self.model_acc;
        if self.out.is_some() {
            cfg.output_dir = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn init_threads(&self) -> Result<()> {
        if let Some(t) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| MbnError::Config(format!("thread pool: {e}")))?;
        }
        Ok(())
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn cmd_run(common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let report = run_experiment(&cfg)?;
    match &cfg.output_dir {
        Some(dir) => {
            write_run_outputs(&report, dir)?;
            print_json(&json!({ "output_dir": dir, "mean_acc": report.mean_acc, "std_acc": report.std_acc }))
        }
        None => print_json(&report),
    }
}

fn cmd_sweep(common: &Common, grid: Grid) -> Result<()> {
    let cfg = common.config()?;
    let report = match grid {
        Grid::Delta(g) => delta_sweep(&cfg, g)?,
        Grid::B(g) => b_sweep(&cfg, g)?,
    };
    match &cfg.output_dir {
        Some(dir) => {
            write_curve_outputs(&report, dir)?;
            print_json(&json!({ "output_dir": dir, "points": report.rows().len() }))
        }
        None => print_json(&report),
    }
}

enum Grid<'a> {
    Delta(&'a [f64]),
    B(&'a [usize]),
}

/// Training data plus what is needed to bring new points into its space.
struct Setup {
    cfg: ExperimentConfig,
    data: Dataset,
    pca: Option<mbn::reduction::PcaModel>,
    res: mbn::harness::Resolved,
}

fn setup(common: &Common) -> Result<Setup> {
    let cfg = common.config()?;
    let (data, pca) = prepare(&cfg)?;
    let res = cfg.resolve(&data)?;
    Ok(Setup { cfg, data, pca, res })
}

fn obtain_ensemble(s: &Setup, saved: Option<&Path>, retain: bool) -> Result<MbnEnsemble> {
    if let Some(dir) = saved {
        let ens = load_ensemble(dir)?;
        if ens.n() != s.data.n() {
            return Err(MbnError::DimensionMismatch { expected: s.data.n(), got: ens.n() });
        }
        return Ok(ens);
    }
    let mut ecfg = ensemble_config(&s.cfg, &s.res, &s.data, s.res.seeds[0]);
    ecfg.base.retain_layer_codes = retain;
    train_ensemble(&s.data, &ecfg)
}

fn load_input(path: &Path, label_column: Option<usize>, s: &Setup) -> Result<mbn::matrix::Matrix> {
    let (delimiter, has_header) = match &s.cfg.data {
        DataSource::Csv { delimiter, has_header, .. } => (*delimiter as u8, *has_header),
        DataSource::Blobs(_) => (b',', false),
    };
    let new = load_csv(path, &CsvOptions { label_column, delimiter, has_header, metric: s.data.metric })?;
    match &s.pca {
        Some(model) => Ok(pca_transform(model, &new.features)?.values),
        None => Ok(new.features),
    }
}

fn cmd_encode(args: &EncodeArgs) -> Result<()> {
    args.common.init_threads()?;
    let s = setup(&args.common)?;
    let new = args.input.as_deref().map(|p| load_input(p, args.input_label_column, &s)).transpose()?;
    if let Some(m) = &new {
        if m.cols() != s.data.d() {
            return Err(MbnError::DimensionMismatch { expected: s.data.d(), got: m.cols() });
        }
    }
    let code: SparseCode = if s.cfg.pipeline.is_ensemble() {
        let ens = obtain_ensemble(&s, args.ensemble.as_deref(), true)?;
        if let Some(dir) = &args.save_ensemble {
            save_ensemble(&ens, dir)?;
        }
        match &new {
            Some(m) => ens.encode_dense(&s.data, m)?,
            None => ens.meta_code.clone(),
        }
    } else {
        if args.ensemble.is_some() || args.save_ensemble.is_some() {
            return Err(MbnError::Config(format!("{} trains a single network, not an ensemble", s.cfg.pipeline)));
        }
        let delta = match s.cfg.pipeline {
            Pipeline::MbnFixedDelta { delta } => delta,
            _ => s.cfg.network.delta,
        };
        let mut ncfg = network_config(&s.cfg, &s.res, &s.data, delta, s.res.seeds[0]);
        ncfg.retain_layer_codes = true;
        let (bottom, model) = train_single(&s.data, &ncfg)?;
        match &new {
            Some(m) => encode(&model, &SparseCode::single(bottom.encode_dense(&s.data.features, s.data.metric, m)?))?,
            None => model.output_code,
        }
    };
    save_code(&code, &args.code)?;
    print_json(&json!({ "code": args.code, "n": code.n(), "blocks": code.num_blocks(), "units": code.units() }))
}

fn cmd_select(common: &Common, saved: Option<&Path>) -> Result<()> {
    common.init_threads()?;
    let s = setup(common)?;
    let scfg = s
        .res
        .selection_config(&s.cfg, s.cfg.pipeline)
        .ok_or_else(|| MbnError::Config(format!("select needs a selection pipeline, got {}", s.cfg.pipeline)))?;
    let ens = obtain_ensemble(&s, saved, false)?;
    let result = select(&ens, &scfg)?;
    let labels = match s.res.classes {
        Some(c) => Some(ahc(
            &result.selected_embedding,
            &AhcConfig { linkage: s.cfg.ahc.linkage, metric: s.res.ahc_metric, c },
        )?),
        None => None,
    };
    let acc = match (&labels, &s.data.labels) {
        (Some(p), Some(t)) => Some(accuracy(p, t)?.acc),
        _ => None,
    };
    let summary = json!({
        "pipeline": s.cfg.pipeline.to_string(),
        "seed": s.res.seeds[0],
        "b": scfg.resolved_b(),
        "deltas": ens.deltas,
        "weights": result.weights,
        "chosen": result.chosen,
        "embedding_dim": result.selected_embedding.dim(),
        "labels": labels.as_ref().map(LabelVector::as_slice),
        "acc": acc,
    });
    match &s.cfg.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            save_json(&summary, dir.join("selection.json"))?;
            save_code(&result.selected_code, dir.join("selected_code.json"))?;
            let emb = Dataset::new(result.selected_embedding.values.clone(), None, Metric::Euclidean, "embedding")?;
            write_csv(&emb, dir.join("embedding.csv"))?;
            let name = s.cfg.pipeline.to_string().split(':').nth(1).unwrap_or("weight").to_string();
            let table = WeightTable {
                series: vec![(name, result.weights.clone())],
                deltas: Some(ens.deltas.clone()),
                model_acc: None,
            };
            emit_weight_plot(&table, dir)?;
            print_json(&json!({ "output_dir": dir, "chosen": result.chosen, "acc": acc }))
        }
        None => print_json(&summary),
    }
}

fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let field = l.split(',').next().unwrap_or("").trim();
            field.parse().map_err(|_| MbnError::Parse { row: i + 1, message: format!("bad label '{field}'") })
        })
        .collect()
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let truth = LabelVector::from_raw(&read_labels(&args.truth)?);
    let pred = match (&args.pred, &args.embedding) {
        (Some(p), _) => LabelVector::from_raw(&read_labels(p)?),
        (None, Some(e)) => {
            let data = load_csv(e, &CsvOptions { metric: args.metric, ..CsvOptions::default() })?;
            let y = mbn::data::Embedding::new(data.features)?;
            let c = args.classes.ok_or_else(|| MbnError::Config("--embedding needs --classes".into()))?;
            ahc(&y, &AhcConfig { linkage: args.linkage, metric: args.metric, c })?
        }
        (None, None) => return Err(MbnError::Config("give --pred or --embedding".into())),
    };
    let report = accuracy(&pred, &truth)?;
    let out = json!({ "acc": report.acc, "n": truth.len(), "mapping": report.mapping, "confusion": report.confusion });
    match &args.out {
        Some(p) => {
            save_json(&out, p)?;
            print_json(&json!({ "acc": report.acc }))
        }
        None => print_json(&out),
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Run(c) => {
            c.init_threads()?;
            cmd_run(c)
        }
        Command::SweepDelta { common, grid } => {
            common.init_threads()?;
            cmd_sweep(common, Grid::Delta(grid))
        }
        Command::SweepB { common, grid } => {
            common.init_threads()?;
            cmd_sweep(common, Grid::B(grid))
        }
        Command::Encode(args) => cmd_encode(args),
        Command::Select { common, ensemble } => cmd_select(common, ensemble.as_deref()),
        Command::Eval(args) => cmd_eval(args),
    }
}

fn fail(kind: &str, code: i32, message: String) -> ExitCode {
    let body = json!({ "error": { "kind": kind, "code": code, "message": message } });
    eprintln!("{body}");
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", 64, e.render().to_string().trim_end().to_string()),
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.code(), e.to_string()),
    }
}
