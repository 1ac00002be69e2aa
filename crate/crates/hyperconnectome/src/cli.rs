//! Command-line entry point: configuration resolution, CSV ingestion and
//! persistence, and the end-to-end drivers behind the `simulate`,
//! `connectome`, `hyperconnectome`, `classify`, and `report` subcommands.
//!
//! Every numeric parameter comes from one resolved [`RunConfig`] whose
//! precedence is flag > config file > built-in default, and the resolved
//! config is echoed into every structured output document. All randomness
//! flows from the single `--seed` value.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::TimeSeriesMatrix;
use crate::error::{Error, Result};
use crate::estimators::{connectome, EpsilonThreshold, EstimatorVariant};
use crate::hypergraph::{
    build_hyperconnectome, pairwise_reduce, serialize_hc, significant_edges, HyperConnectome,
};
use crate::learn::{
    run_experiment, ExperimentConfig, ExperimentReport, FeatureKind, KindSummary,
};
use crate::simulation::gen_dataset_m;

/// Fully resolved parameters of one command invocation. Echoed verbatim
/// into every structured output document; feeding such an echo back through
/// `--config` reproduces the run byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out: Option<String>,
    pub epsilon: f64,
    pub d: usize,
    pub variant: String,
    pub seed: u64,
    pub trials: usize,
    pub fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub roi: Option<String>,
    pub samples: usize,
    pub log_base: String,
    pub threshold: f64,
    pub subjects_x: usize,
    pub subjects_y: usize,
    pub variables: usize,
    pub features: String,
    pub positive_label: String,
    pub transpose: bool,
    pub reduce: bool,
    pub edges: bool,
    pub include_degenerate: bool,
    pub welch: bool,
    pub epochs: usize,
    pub lambda: f64,
}

impl RunConfig {
    pub fn defaults(command: &str) -> Self {
        RunConfig {
            command: command.to_string(),
            input: None,
            out: None,
            epsilon: 1e-5,
            d: 3,
            variant: "paper".into(),
            seed: 0,
            trials: 10,
            fraction: 0.5,
            roi: None,
            samples: 20,
            log_base: "nat".into(),
            threshold: 256.0,
            subjects_x: 1000,
            subjects_y: 1000,
            variables: 3,
            features: "both".into(),
            positive_label: "Y".into(),
            transpose: false,
            reduce: false,
            edges: false,
            include_degenerate: true,
            welch: false,
            epochs: 200,
            lambda: 1e-4,
        }
    }

    pub fn variant(&self) -> Result<EstimatorVariant> {
        self.variant.parse()
    }

    pub fn epsilon_threshold(&self) -> Result<EpsilonThreshold> {
        EpsilonThreshold::new(self.epsilon)
    }

    pub fn roi_range(&self) -> Result<Option<(usize, usize)>> {
        self.roi.as_deref().map(parse_roi).transpose()
    }

    fn validate(&self) -> Result<()> {
        self.variant()?;
        self.epsilon_threshold()?;
        self.roi_range()?;
        if self.d < 2 {
            return Err(Error::contract(format!("d must be >= 2, got {}", self.d)));
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::contract(format!(
                "fraction must be in (0, 1), got {}",
                self.fraction
            )));
        }
        if self.samples == 0 {
            return Err(Error::contract("samples cap must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::contract("at least one trial is required"));
        }
        if self.log_base != "nat" && self.log_base != "bit" {
            return Err(Error::contract(format!(
                "log base must be nat or bit, got {:?}",
                self.log_base
            )));
        }
        if !matches!(self.features.as_str(), "graph" | "hypergraph" | "both") {
            return Err(Error::contract(format!(
                "features must be graph, hypergraph, or both, got {:?}",
                self.features
            )));
        }
        if self.variables < 2 {
            return Err(Error::contract("at least 2 variables are required"));
        }
        if self.epochs == 0 {
            return Err(Error::contract("at least one training epoch is required"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::contract(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !self.threshold.is_finite() {
            return Err(Error::contract("threshold must be finite"));
        }
        Ok(())
    }

    fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    fn experiment_config(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            trials: self.trials,
            fraction: self.fraction,
            seed: self.seed,
            d: self.d,
            epsilon: self.epsilon_threshold()?,
            variant: self.variant()?,
            include_degenerate: self.include_degenerate,
            epochs: self.epochs,
            lambda: self.lambda,
        })
    }
}

/// `A:B` 1-based inclusive variable range.
pub fn parse_roi(s: &str) -> Result<(usize, usize)> {
    let err = || Error::contract(format!("roi range must look like 1:61, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(err)?;
    let lo: usize = a.trim().parse().map_err(|_| err())?;
    let hi: usize = b.trim().parse().map_err(|_| err())?;
    if lo == 0 || lo > hi {
        return Err(err());
    }
    Ok((lo, hi))
}

/// Optional defaults file (TOML, or the JSON echo embedded in a previous
/// run's output). Every field is optional; flags take precedence.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default)]
pub struct ConfigFile {
    pub command: Option<String>,
    pub input: Option<String>,
    pub out: Option<String>,
    pub epsilon: Option<f64>,
    pub d: Option<usize>,
    pub variant: Option<String>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub fraction: Option<f64>,
    pub roi: Option<String>,
    pub samples: Option<usize>,
    pub log_base: Option<String>,
    pub threshold: Option<f64>,
    pub subjects_x: Option<usize>,
    pub subjects_y: Option<usize>,
    pub variables: Option<usize>,
    pub features: Option<String>,
    pub positive_label: Option<String>,
    pub transpose: Option<bool>,
    pub reduce: Option<bool>,
    pub edges: Option<bool>,
    pub include_degenerate: Option<bool>,
    pub welch: Option<bool>,
    pub epochs: Option<usize>,
    pub lambda: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        if text.trim_start().starts_with('{') {
            serde_json::from_str(&text).map_err(|e| {
                Error::parse(path.display().to_string(), e.line(), e.to_string())
            })
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hyperconnectome",
    about = "Pearson connectomes and total-correlation hyper-connectomes from multivariate time series",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Optional config file supplying defaults (flags take precedence).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for per-subject and per-tuple fan-out (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled simulation cohort of parity-construction subjects.
    Simulate(SimulateArgs),
    /// Pearson correlation matrix per subject.
    Connectome(IngestArgs),
    /// Total-correlation hyper-connectome document per subject.
    Hyperconnectome(HyperArgs),
    /// Graph-vs-hypergraph classification experiment over a dataset directory.
    Classify(ClassifyArgs),
    /// Pretty-print an experiment report as an aligned table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of independent-coordinate subjects.
    #[arg(long)]
    pub subjects_x: Option<usize>,
    /// Number of parity-construction subjects.
    #[arg(long)]
    pub subjects_y: Option<usize>,
    /// Samples per subject.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Variables per subject (3 reproduces the reference construction).
    #[arg(long)]
    pub variables: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Input CSV file or directory of CSV files (rows = variables).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// 1-based inclusive variable range, e.g. 1:61 (default: all).
    #[arg(long)]
    pub roi: Option<String>,
    /// Keep only the first N samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Input files are samples x variables instead.
    #[arg(long)]
    pub transpose: bool,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    /// Hyperedge order.
    #[arg(long)]
    pub d: Option<usize>,
    /// Ball radius for the probability estimates.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Estimator normalization: paper, plugin, or aligned.
    #[arg(long)]
    pub variant: Option<String>,
    /// Also emit the pairwise-sum matrix per subject.
    #[arg(long)]
    pub reduce: bool,
    /// Also emit the significant-edge list per subject.
    #[arg(long)]
    pub edges: bool,
    /// Weight threshold for --edges (strictly greater than).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Report weights in nats or bits.
    #[arg(long)]
    pub log_base: Option<String>,
    /// Exclude repeated-index tuples from --reduce.
    #[arg(long)]
    pub exclude_degenerate: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Dataset directory containing manifest.json.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output report file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub variant: Option<String>,
    /// Feature families to run: graph, hypergraph, or both.
    #[arg(long)]
    pub features: Option<String>,
    /// Manifest label treated as the positive class.
    #[arg(long)]
    pub positive_label: Option<String>,
    #[arg(long)]
    pub roi: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub transpose: bool,
    /// Drop repeated-index tuples from hypergraph features.
    #[arg(long)]
    pub exclude_degenerate: bool,
    /// Use Welch's t-test instead of the pooled-variance test.
    #[arg(long)]
    pub welch: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Experiment report JSON to print.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

fn path_string(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

/// Merge flags over file defaults over built-in defaults.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let name = match &cli.command {
        Command::Simulate(_) => "simulate",
        Command::Connectome(_) => "connectome",
        Command::Hyperconnectome(_) => "hyperconnectome",
        Command::Classify(_) => "classify",
        Command::Report(_) => "report",
    };
    let mut cfg = RunConfig::defaults(name);
    macro_rules! merge {
        ($field:ident, $flag:expr) => {
            if let Some(v) = $flag.clone().or(file.$field.clone()) {
                cfg.$field = v;
            }
        };
    }
    merge!(seed, file.seed); // file-only fields first
    merge!(epsilon, file.epsilon);
    merge!(d, file.d);
    merge!(variant, file.variant);
    merge!(trials, file.trials);
    merge!(fraction, file.fraction);
    merge!(samples, file.samples);
    merge!(log_base, file.log_base);
    merge!(threshold, file.threshold);
    merge!(subjects_x, file.subjects_x);
    merge!(subjects_y, file.subjects_y);
    merge!(variables, file.variables);
    merge!(features, file.features);
    merge!(positive_label, file.positive_label);
    merge!(epochs, file.epochs);
    merge!(lambda, file.lambda);
    cfg.roi = file.roi.clone();
    cfg.input = file.input.clone();
    cfg.out = file.out.clone();
    cfg.transpose = file.transpose.unwrap_or(false);
    cfg.reduce = file.reduce.unwrap_or(false);
    cfg.edges = file.edges.unwrap_or(false);
    cfg.include_degenerate = file.include_degenerate.unwrap_or(true);
    cfg.welch = file.welch.unwrap_or(false);

    match &cli.command {
        Command::Simulate(a) => {
            merge!(seed, a.seed);
            merge!(samples, a.samples);
            merge!(subjects_x, a.subjects_x);
            merge!(subjects_y, a.subjects_y);
            merge!(variables, a.variables);
            cfg.out = path_string(&a.out).or(cfg.out);
        }
        Command::Connectome(a) => {
            merge!(samples, a.samples);
            cfg.roi = a.roi.clone().or(cfg.roi);
            cfg.input = path_string(&a.input).or(cfg.input);
            cfg.out = path_string(&a.out).or(cfg.out);
            cfg.transpose |= a.transpose;
        }
        Command::Hyperconnectome(a) => {
            merge!(samples, a.ingest.samples);
            merge!(d, a.d);
            merge!(epsilon, a.epsilon);
            merge!(variant, a.variant);
            merge!(threshold, a.threshold);
            merge!(log_base, a.log_base);
            cfg.roi = a.ingest.roi.clone().or(cfg.roi);
            cfg.input = path_string(&a.ingest.input).or(cfg.input);
            cfg.out = path_string(&a.ingest.out).or(cfg.out);
            cfg.transpose |= a.ingest.transpose;
            cfg.reduce |= a.reduce;
            cfg.edges |= a.edges;
            if a.exclude_degenerate {
                cfg.include_degenerate = false;
            }
        }
        Command::Classify(a) => {
            merge!(seed, a.seed);
            merge!(trials, a.trials);
            merge!(fraction, a.fraction);
            merge!(d, a.d);
            merge!(epsilon, a.epsilon);
            merge!(variant, a.variant);
            merge!(features, a.features);
            merge!(positive_label, a.positive_label);
            merge!(samples, a.samples);
            merge!(epochs, a.epochs);
            merge!(lambda, a.lambda);
            cfg.roi = a.roi.clone().or(cfg.roi);
            cfg.input = path_string(&a.data).or(cfg.input);
            cfg.out = path_string(&a.out).or(cfg.out);
            cfg.transpose |= a.transpose;
            cfg.welch |= a.welch;
            if a.exclude_degenerate {
                cfg.include_degenerate = false;
            }
        }
        Command::Report(a) => {
            cfg.input = path_string(&a.input).or(cfg.input);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Write a file atomically: temp file in the target directory, fsync, rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let display = path.display().to_string();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d),
        None => tempfile::NamedTempFile::new_in("."),
    }
    .map_err(|e| Error::io(display.clone(), e))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| Error::io(display.clone(), e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(display, e.error))?;
    Ok(())
}

/// Parse one subject CSV: rows are variables and columns are samples
/// (unless `transpose`), with an optional leading label row. Applies the
/// 1-based inclusive `roi` range and the `samples` cap.
pub fn ingest_timeseries(
    path: &Path,
    roi: Option<(usize, usize)>,
    samples_cap: usize,
    transpose: bool,
) -> Result<TimeSeriesMatrix> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .collect();
    if lines.is_empty() {
        return Err(Error::parse(&display, 0, "file is empty"));
    }

    let parse_row = |lineno: usize, line: &str| -> Result<Vec<f64>> {
        line.split(',')
            .map(|cell| {
                let cell = cell.trim();
                let v: f64 = cell.parse().map_err(|_| {
                    Error::parse(&display, lineno, format!("non-numeric cell {cell:?}"))
                })?;
                if !v.is_finite() {
                    return Err(Error::parse(
                        &display,
                        lineno,
                        format!("non-finite value {cell:?}"),
                    ));
                }
                Ok(v)
            })
            .collect()
    };

    let first_is_header = lines[0]
        .1
        .split(',')
        .any(|cell| cell.trim().parse::<f64>().is_err());
    let (labels, data_lines) = if first_is_header {
        let labels: Vec<String> = lines[0]
            .1
            .split(',')
            .map(|c| c.trim().to_string())
            .collect();
        (Some(labels), &lines[1..])
    } else {
        (None, &lines[..])
    };
    if data_lines.is_empty() {
        return Err(Error::parse(&display, lines[0].0, "no data rows"));
    }

    let mut grid: Vec<Vec<f64>> = Vec::with_capacity(data_lines.len());
    let width = data_lines[0].1.split(',').count();
    for &(lineno, line) in data_lines {
        let row = parse_row(lineno, line)?;
        if row.len() != width {
            return Err(Error::parse(
                &display,
                lineno,
                format!("row has {} cells, expected {width}", row.len()),
            ));
        }
        grid.push(row);
    }

    let ts = if transpose {
        // Grid is samples x variables; the label row names the columns.
        if let Some(ref labels) = labels {
            if labels.len() != width {
                return Err(Error::parse(
                    &display,
                    lines[0].0,
                    format!("{} labels for {width} variable columns", labels.len()),
                ));
            }
        }
        TimeSeriesMatrix::from_rows(grid, None)
            .and_then(|g| g.transpose())
            .and_then(|t| {
                TimeSeriesMatrix::from_rows(
                    t.rows().map(|r| r.to_vec()).collect(),
                    labels,
                )
            })
    } else {
        if let Some(ref labels) = labels {
            if labels.len() != grid.len() {
                return Err(Error::parse(
                    &display,
                    lines[0].0,
                    format!("{} labels for {} variable rows", labels.len(), grid.len()),
                ));
            }
        }
        TimeSeriesMatrix::from_rows(grid, labels)
    }
    .map_err(|e| Error::parse(&display, 0, e.to_string()))?;

    ts.restrict(roi, Some(samples_cap))
        .map_err(|e| Error::parse(&display, 0, e.to_string()))
}

/// Input files for a per-subject command: the path itself, or every `.csv`
/// inside it (sorted by name).
pub fn discover_inputs(path: &Path) -> Result<Vec<PathBuf>> {
    let display = path.display().to_string();
    let meta = fs::metadata(path).map_err(|e| Error::io(display.clone(), e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(display.clone(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::parse(&display, 0, "no .csv files found"));
    }
    Ok(files)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "subject".into())
}

fn require_out(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.out
        .as_ref()
        .map(PathBuf::from)
        .ok_or_else(|| Error::contract("--out is required"))
}

fn require_input(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.input
        .as_ref()
        .map(PathBuf::from)
        .ok_or_else(|| Error::contract("--input is required"))
}

fn matrix_csv(labels: &[String], m: usize, get: impl Fn(usize, usize) -> f64) -> String {
    let mut out = String::new();
    for label in labels {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for i in 0..m {
        out.push_str(&labels[i]);
        for j in 0..m {
            let _ = write!(out, ",{}", get(i, j));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestSubject {
    pub file: String,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<serde_json::Value>,
    pub subjects: Vec<ManifestSubject>,
}

fn pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("document serializes");
    bytes.push(b'\n');
    bytes
}

/// Generate and persist a simulation dataset: one CSV per subject plus a
/// manifest with labels and per-subject stream seeds.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let out = require_out(cfg)?;
    fs::create_dir_all(&out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let dataset = gen_dataset_m(
        cfg.subjects_x,
        cfg.subjects_y,
        cfg.variables,
        cfg.samples,
        cfg.seed,
    )?;
    let mut manifest = Manifest {
        config: Some(cfg.echo()),
        subjects: Vec::with_capacity(dataset.subjects.len()),
    };
    for (k, subject) in dataset.subjects.iter().enumerate() {
        let name = format!("subject_{k:04}.csv");
        let mut body = String::new();
        for row in subject.ts.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            body.push_str(&cells.join(","));
            body.push('\n');
        }
        write_atomic(&out.join(&name), body.as_bytes())?;
        manifest.subjects.push(ManifestSubject {
            file: name,
            label: subject.label.to_string(),
            seed: Some(subject.seed),
        });
    }
    write_atomic(&out.join("manifest.json"), &pretty_json(&manifest))?;
    Ok(())
}

/// Pearson correlation matrix per subject, written as CSV with a label
/// header row and column. The resolved config lands in a sidecar file.
pub fn cmd_connectome(cfg: &RunConfig) -> Result<()> {
    let out = require_out(cfg)?;
    fs::create_dir_all(&out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let inputs = discover_inputs(&require_input(cfg)?)?;
    let roi = cfg.roi_range()?;
    inputs.par_iter().try_for_each(|path| -> Result<()> {
        let ts = ingest_timeseries(path, roi, cfg.samples, cfg.transpose)?;
        if ts.m() < 2 {
            return Err(Error::InsufficientVariables {
                needed: 2,
                got: ts.m(),
            });
        }
        let cm = connectome(&ts)?;
        let labels = ts.labels_or_default();
        let csv = matrix_csv(&labels, cm.m(), |i, j| cm.get(i, j));
        write_atomic(
            &out.join(format!("{}_connectome.csv", file_stem(path))),
            csv.as_bytes(),
        )
    })?;
    write_atomic(&out.join("run_config.json"), &pretty_json(&cfg.echo()))?;
    Ok(())
}

#[derive(Serialize)]
struct EdgeDoc<'a> {
    threshold: f64,
    config: &'a serde_json::Value,
    edges: Vec<EdgeEntry>,
}

#[derive(Serialize)]
struct EdgeEntry {
    idx: Vec<usize>,
    w: f64,
}

fn hyperconnectome_outputs(
    cfg: &RunConfig,
    echo: &serde_json::Value,
    out: &Path,
    stem: &str,
    hc: &HyperConnectome,
) -> Result<()> {
    write_atomic(
        &out.join(format!("{stem}_hyperconnectome.json")),
        serialize_hc(hc).as_bytes(),
    )?;
    if cfg.reduce {
        let reduced = pairwise_reduce(hc, cfg.include_degenerate);
        let csv = matrix_csv(hc.roi_labels(), reduced.m(), |i, j| reduced.get(i, j));
        write_atomic(&out.join(format!("{stem}_reduced.csv")), csv.as_bytes())?;
    }
    if cfg.edges {
        let list = significant_edges(hc, cfg.threshold);
        let doc = EdgeDoc {
            threshold: list.threshold,
            config: echo,
            edges: list
                .edges
                .iter()
                .map(|(tuple, w)| EdgeEntry {
                    idx: tuple.iter().map(|i| i + 1).collect(),
                    w: *w,
                })
                .collect(),
        };
        write_atomic(&out.join(format!("{stem}_edges.json")), &pretty_json(&doc))?;
    }
    Ok(())
}

/// Hyper-connectome document per subject, with optional pairwise-matrix and
/// significant-edge exports.
pub fn cmd_hyperconnectome(cfg: &RunConfig) -> Result<()> {
    let out = require_out(cfg)?;
    fs::create_dir_all(&out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let inputs = discover_inputs(&require_input(cfg)?)?;
    let roi = cfg.roi_range()?;
    let epsilon = cfg.epsilon_threshold()?;
    let variant = cfg.variant()?;
    let echo = cfg.echo();
    inputs.par_iter().try_for_each(|path| -> Result<()> {
        let ts = ingest_timeseries(path, roi, cfg.samples, cfg.transpose)?;
        let stem = file_stem(path);
        let mut hc = build_hyperconnectome(&ts, cfg.d, epsilon, variant)?
            .with_source_id(stem.clone())
            .with_run_config(echo.clone());
        if cfg.log_base == "bit" {
            hc = hc.in_bits()?;
        }
        hyperconnectome_outputs(cfg, &echo, &out, &stem, &hc)
    })?;
    Ok(())
}

/// Load a dataset directory (manifest plus subject CSVs) and map labels to
/// +/-1 using the configured positive label.
pub fn load_dataset(cfg: &RunConfig) -> Result<(Vec<TimeSeriesMatrix>, Vec<i8>)> {
    let dir = require_input(cfg)?;
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
        Error::parse(manifest_path.display().to_string(), e.line(), e.to_string())
    })?;
    if manifest.subjects.is_empty() {
        return Err(Error::parse(
            manifest_path.display().to_string(),
            0,
            "manifest lists no subjects",
        ));
    }
    let roi = cfg.roi_range()?;
    let subjects: Vec<TimeSeriesMatrix> = manifest
        .subjects
        .par_iter()
        .map(|s| ingest_timeseries(&dir.join(&s.file), roi, cfg.samples, cfg.transpose))
        .collect::<Result<_>>()?;
    let labels: Vec<i8> = manifest
        .subjects
        .iter()
        .map(|s| if s.label == cfg.positive_label { 1 } else { -1 })
        .collect();
    for class in [1i8, -1] {
        let count = labels.iter().filter(|&&l| l == class).count();
        if count < 2 {
            return Err(Error::contract(format!(
                "need at least 2 subjects per class, positive label {:?} side has {count}",
                cfg.positive_label
            )));
        }
    }
    Ok((subjects, labels))
}

/// Run the full classification experiment and write the report document.
pub fn cmd_classify(cfg: &RunConfig) -> Result<ExperimentReport> {
    let (subjects, labels) = load_dataset(cfg)?;
    let experiment = cfg.experiment_config()?;
    let kinds: Vec<FeatureKind> = match cfg.features.as_str() {
        "graph" => vec![FeatureKind::Graph],
        "hypergraph" => vec![FeatureKind::Hypergraph],
        _ => vec![FeatureKind::Graph, FeatureKind::Hypergraph],
    };
    let summaries: Vec<KindSummary> = kinds
        .into_iter()
        .map(|kind| {
            run_experiment(&subjects, &labels, kind, &experiment)
                .map(|trials| KindSummary::new(kind, trials))
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new(summaries, cfg.welch)?;
    report.config = Some(cfg.echo());
    if let Some(out) = &cfg.out {
        write_atomic(Path::new(out), &pretty_json(&report))?;
    }
    Ok(report)
}

/// Aligned-table rendering of an experiment report, columns matching the
/// training/testing/F1 layout.
pub fn render_report(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>18} {:>18} {:>10}",
        "", "Training Accuracy", "Testing Accuracy", "F1 Score"
    );
    for kind in &report.kinds {
        let name = match kind.kind {
            FeatureKind::Graph => "Graph",
            FeatureKind::Hypergraph => "Hypergraph",
        };
        let _ = writeln!(
            out,
            "{name:<14} {:>17.1}% {:>17.1}% {:>10.2}",
            kind.mean_train_accuracy * 100.0,
            kind.mean_test_accuracy * 100.0,
            kind.mean_f1
        );
    }
    if let (Some(t), Some(p)) = (&report.t_statistic, report.p_value) {
        let trials = report.kinds[0].trials.len();
        let p_text = if p >= 1e-4 {
            format!("{p:.5}")
        } else {
            format!("{p:.3e}")
        };
        let _ = writeln!(
            out,
            "\nTwo-sample t-test on testing accuracy over {trials} paired trials: t = {:.4}, p = {p_text}",
            t.0
        );
    }
    out
}

/// Read a report document and render it.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let path = require_input(cfg)?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let report: ExperimentReport = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))?;
    Ok(render_report(&report))
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    match &cli.command {
        Command::Simulate(_) => cmd_simulate(&cfg),
        Command::Connectome(_) => cmd_connectome(&cfg),
        Command::Hyperconnectome(_) => cmd_hyperconnectome(&cfg),
        Command::Classify(_) => {
            let report = cmd_classify(&cfg)?;
            print!("{}", render_report(&report));
            Ok(())
        }
        Command::Report(_) => {
            let table = cmd_report(&cfg)?;
            print!("{table}");
            Ok(())
        }
    }
}

/// Parse arguments, run, and map errors to exit codes: 0 success,
/// 1 contract violation, 2 I/O or parse failure.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let body = || match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    match cli.workers {
        Some(w) if w > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("worker pool")
            .install(body),
        _ => body(),
    }
}
