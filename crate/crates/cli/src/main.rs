use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use csiqa::diversity::{feature_diversity, DEFAULT_BINS};
use csiqa::features::extract_features;
use csiqa::jpeg::DEFAULT_QUALITY;
use csiqa::model::{read_dataset, write_dataset};
use csiqa::similarity::feature_difference;
use csiqa::synth::{self, Generated};
use csiqa::workflow::{
    self, augment_select, diversity_report, similarity_report, DiversityConfig, Normalization,
};
use csiqa::{
    AggregationRule, Bandwidth, BinEdges, Dataset, DistanceKind, DiversityMeasure, FeatureBundle,
    FeatureKind, RandomSeed, SelectionConfig, Selector, SimilarityConfig, SimilarityMeasure,
    SynthConfig,
};

#[derive(Parser, Debug)]
#[command(
    name = "csiqa",
    version,
    about = "Similarity and diversity assessment for channel-state datasets"
)]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic datasets from a preset and print a manifest.
    Generate(GenerateArgs),
    /// Extract per-sample features from a dataset.
    Features(FeaturesArgs),
    /// Compare two datasets.
    Similarity(SimilarityArgs),
    /// Measure the diversity of one dataset.
    Diversity(DiversityArgs),
    /// Rank candidate datasets by similarity to a reference and select the closest.
    Select(SelectArgs),
    /// Evaluate every dataset pair (or every dataset) of a directory as long-form rows.
    Sweep(SweepArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Preset {
    /// Ten datasets with RMS delay spread windows at increasing offsets.
    AppendixA,
    /// Candidate pool with randomly drawn path ranges.
    AppendixB,
    /// 84-dataset factorial grid of path ranges.
    AppendixC,
    /// Wide-range stand-in for a mixed urban test set, peak-normalized.
    UmaProxy,
    /// One dataset per fixed RMS delay spread target.
    DelaySpread,
}

impl Preset {
    fn label(self) -> &'static str {
        match self {
            Preset::AppendixA => "appendix-a",
            Preset::AppendixB => "appendix-b",
            Preset::AppendixC => "appendix-c",
            Preset::UmaProxy => "uma-proxy",
            Preset::DelaySpread => "delay-spread",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Rule {
    Average,
    Min,
    Max,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SetMeasure {
    Mean,
    Mmd,
    Nnca,
    Wasserstein,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SpreadMeasure {
    Distance,
    Dpp,
    Compression,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SweepMode {
    Similarity,
    Diversity,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct FeatureArgs {
    /// Comma-separated features: pdp, aps, doppler, pdp_sparsity, aps_sparsity, doppler_sparsity.
    #[arg(long, value_delimiter = ',', value_parser = parse_feature)]
    features: Vec<FeatureKind>,
    #[arg(long, value_parser = parse_distance, default_value = "ecs")]
    distance: DistanceKind,
    /// Scale each sample to unit peak magnitude before feature extraction.
    #[arg(long)]
    normalize_max: bool,
}

impl FeatureArgs {
    fn features(&self) -> Vec<FeatureKind> {
        if self.features.is_empty() {
            FeatureKind::DEFAULT.to_vec()
        } else {
            self.features.clone()
        }
    }
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[arg(long, value_enum, default_value = "wasserstein")]
    measure: SetMeasure,
    /// Wasserstein order.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Kernel bandwidth: a positive number or "median".
    #[arg(long, value_parser = parse_bandwidth, default_value = "median")]
    bandwidth: Bandwidth,
    #[arg(long, value_enum, default_value = "average")]
    rule: Rule,
}

impl MeasureArgs {
    fn measure(&self) -> SimilarityMeasure {
        match self.measure {
            SetMeasure::Mean => SimilarityMeasure::MeanDistance,
            SetMeasure::Mmd => SimilarityMeasure::Mmd {
                bandwidth: self.bandwidth,
            },
            SetMeasure::Nnca => SimilarityMeasure::Nnca,
            SetMeasure::Wasserstein => SimilarityMeasure::Wasserstein { p: self.p },
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    preset: Preset,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples per dataset.
    #[arg(long)]
    samples: Option<usize>,
    /// Number of datasets (appendix-a, appendix-b and uma-proxy).
    #[arg(long)]
    datasets: Option<usize>,
    /// Time snapshots per sample.
    #[arg(long, default_value_t = 1)]
    snapshots: usize,
    /// RMS delay spread window width in ns (appendix-a).
    #[arg(long, default_value_t = 2000.0)]
    width: f64,
    /// RMS delay spread targets in ns (delay-spread).
    #[arg(long, value_delimiter = ',', default_values_t = [20.0, 100.0, 400.0, 800.0, 1600.0, 3200.0])]
    targets: Vec<f64>,
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    dataset: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = parse_feature)]
    features: Vec<FeatureKind>,
    #[arg(long)]
    normalize_max: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SimilarityArgs {
    x: PathBuf,
    y: PathBuf,
    #[command(flatten)]
    feature: FeatureArgs,
    #[command(flatten)]
    measure: MeasureArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SpreadArgs {
    /// Measure for spectral features; scalar features always use histogram entropy.
    #[arg(long, value_enum, default_value = "distance")]
    measure: SpreadMeasure,
    /// Histogram bins for entropy.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// DPP kernel bandwidth: a positive number or "median".
    #[arg(long, value_parser = parse_bandwidth, default_value = "median")]
    bandwidth: Bandwidth,
    #[arg(long, default_value_t = 1e-9)]
    jitter: f64,
    /// JPEG quality for the compression measure.
    #[arg(long, default_value_t = DEFAULT_QUALITY)]
    quality: u8,
}

impl SpreadArgs {
    fn measure_for(&self, feature: FeatureKind, distance: DistanceKind) -> DiversityMeasure {
        if feature.is_scalar() {
            return DiversityMeasure::Entropy {
                edges: BinEdges::Uniform { bins: self.bins },
            };
        }
        match self.measure {
            SpreadMeasure::Distance => DiversityMeasure::DistanceBased { distance },
            SpreadMeasure::Dpp => DiversityMeasure::Dpp {
                distance,
                bandwidth: self.bandwidth,
                jitter: self.jitter,
            },
            SpreadMeasure::Compression => DiversityMeasure::Compression {
                quality: self.quality,
            },
        }
    }

    fn config(
        &self,
        features: &[FeatureKind],
        distance: DistanceKind,
        rule: Rule,
        normalize_max: bool,
    ) -> DiversityConfig {
        DiversityConfig {
            features: features.to_vec(),
            measures: features
                .iter()
                .map(|&f| (f, self.measure_for(f, distance)))
                .collect(),
            rule: rule_for(rule, features),
            normalization: Normalization::None,
            normalize_max,
        }
    }
}

#[derive(Args, Debug)]
struct DiversityArgs {
    dataset: PathBuf,
    #[command(flatten)]
    feature: FeatureArgs,
    #[command(flatten)]
    spread: SpreadArgs,
    #[arg(long, value_enum, default_value = "average")]
    rule: Rule,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SelectArgs {
    reference: PathBuf,
    /// Glob matching the candidate dataset files.
    #[arg(long)]
    candidates: String,
    /// Number of candidates to select.
    #[arg(
        long,
        conflicts_with = "threshold",
        required_unless_present = "threshold"
    )]
    k: Option<usize>,
    /// Select every candidate whose aggregate difference is at most this value.
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    feature: FeatureArgs,
    #[command(flatten)]
    measure: MeasureArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Directory of .csid files, processed in file-name order.
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "similarity")]
    mode: SweepMode,
    #[command(flatten)]
    feature: FeatureArgs,
    /// Set measure (similarity mode: mean, mmd, nnca, wasserstein) or spectral
    /// diversity measure (diversity mode: distance, dpp, compression).
    #[arg(long)]
    measure: Option<String>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Kernel bandwidth: a positive number or "median".
    #[arg(long, value_parser = parse_bandwidth, default_value = "median")]
    bandwidth: Bandwidth,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long, default_value_t = 1e-9)]
    jitter: f64,
    #[arg(long, default_value_t = DEFAULT_QUALITY)]
    quality: u8,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_feature(s: &str) -> Result<FeatureKind, String> {
    s.parse::<FeatureKind>().map_err(|e| e.to_string())
}

fn parse_distance(s: &str) -> Result<DistanceKind, String> {
    s.parse::<DistanceKind>().map_err(|e| e.to_string())
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    if s.eq_ignore_ascii_case("median") {
        return Ok(Bandwidth::MedianHeuristic);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Bandwidth::Fixed(v)),
        _ => Err(format!("expected a positive number or 'median', got '{s}'")),
    }
}

fn rule_for(rule: Rule, features: &[FeatureKind]) -> AggregationRule {
    match rule {
        Rule::Average => AggregationRule::average(features),
        Rule::Min => AggregationRule::Min,
        Rule::Max => AggregationRule::Max,
    }
}

enum Failure {
    Usage(String),
    Compute(csiqa::Error),
}

impl From<csiqa::Error> for Failure {
    fn from(e: csiqa::Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Compute(e.into())
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("no such file: {}", path.display())))
    }
}

fn load(path: &Path) -> CliResult<Dataset> {
    read_dataset(path).map_err(|e| {
        Failure::Compute(csiqa::Error::InvalidInput(format!(
            "{}: {e}",
            path.display()
        )))
    })
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Compute(e.into())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Compute(e.into()))
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Features(a) => cmd_features(a),
        Command::Similarity(a) => cmd_similarity(a),
        Command::Diversity(a) => cmd_diversity(a),
        Command::Select(a) => cmd_select(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_generate(a: &GenerateArgs) -> CliResult<()> {
    if a.out.exists() && !a.out.is_dir() {
        return Err(usage(format!(
            "{} exists and is not a directory",
            a.out.display()
        )));
    }
    if a.datasets == Some(0) || a.samples == Some(0) {
        return Err(usage("--datasets and --samples must be >= 1"));
    }
    let grid = match a.preset {
        Preset::AppendixA | Preset::DelaySpread => (8, 8),
        _ => (2, 8),
    };
    let cfg = SynthConfig {
        antenna_grid: grid,
        n_snapshots: a.snapshots,
        n_samples: a
            .samples
            .unwrap_or(if matches!(a.preset, Preset::AppendixB) {
                100
            } else {
                200
            }),
        seed: RandomSeed(a.seed),
        normalize_max: matches!(a.preset, Preset::UmaProxy),
        ..SynthConfig::default()
    };
    cfg.validate()?;
    let generated: Vec<Generated> = match a.preset {
        Preset::AppendixA => synth::appendix_a_corpus(
            &cfg,
            a.width,
            &synth::appendix_a_offsets(a.datasets.unwrap_or(10)),
        )?,
        Preset::AppendixB => synth::appendix_b_candidate_pool(&cfg, a.datasets.unwrap_or(100))?,
        Preset::AppendixC => synth::appendix_c_grid(&cfg)?,
        Preset::UmaProxy => (0..a.datasets.unwrap_or(1) as u64)
            .map(|k| {
                let c = SynthConfig {
                    seed: cfg.seed.derive(k),
                    ..cfg.clone()
                };
                synth::generate_dataset(&c, &synth::uma_proxy_ranges())
            })
            .collect::<csiqa::Result<_>>()?,
        Preset::DelaySpread => a
            .targets
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let c = SynthConfig {
                    seed: cfg.seed.derive(k as u64),
                    ..cfg.clone()
                };
                synth::generate_dataset(&c, &synth::delay_spread_ranges(t))
            })
            .collect::<csiqa::Result<_>>()?,
    };

    fs::create_dir_all(&a.out).map_err(|e| Failure::Compute(e.into()))?;
    let mut files = Vec::with_capacity(generated.len());
    for (k, g) in generated.iter().enumerate() {
        let path = a.out.join(format!("{}-{k:03}.csid", a.preset.label()));
        write_dataset(&g.dataset, &path)?;
        let (min, mean, max) = g.rms_stats_ns();
        let config: SynthConfig = serde_json::from_str(&g.dataset.metadata()["config"])?;
        files.push(json!({
            "path": path.display().to_string(),
            "seed": config.seed,
            "samples": g.dataset.len(),
            "ranges": g.ranges,
            "rms_delay_spread_ns": {"min": min, "mean": mean, "max": max},
        }));
    }
    let args: Vec<String> = std::env::args().skip(1).collect();
    let manifest = json!({
        "schema_version": workflow::SCHEMA_VERSION,
        "command": "generate",
        "args": args,
        "preset": a.preset.label(),
        "seed": a.seed,
        "config": cfg,
        "files": files,
    });
    emit(None, &pretty(&manifest)?)
}

fn feature_json(b: &FeatureBundle, kind: FeatureKind) -> Value {
    match b.get(kind) {
        Some(csiqa::FeatureView::Scalar(v)) => json!(v),
        Some(csiqa::FeatureView::Vector(v)) => json!(v),
        Some(csiqa::FeatureView::Matrix(m)) => json!(m.to_rows()),
        None => Value::Null,
    }
}

fn cmd_features(a: &FeaturesArgs) -> CliResult<()> {
    require_file(&a.dataset)?;
    let features = if a.features.is_empty() {
        FeatureKind::DEFAULT.to_vec()
    } else {
        a.features.clone()
    };
    let mut d = load(&a.dataset)?;
    if a.normalize_max {
        d = d.normalized_by_max()?;
    }
    let bundles = extract_features(&d)?;
    let text = match a.output.format {
        Format::Json => {
            let samples: Vec<Value> = bundles
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let mut obj = serde_json::Map::new();
                    obj.insert("index".into(), json!(i));
                    for &f in &features {
                        obj.insert(f.name().into(), feature_json(b, f));
                    }
                    Value::Object(obj)
                })
                .collect();
            pretty(&json!({"dataset": a.dataset.display().to_string(), "samples": samples}))?
        }
        Format::Csv => {
            let mut s = String::from("sample,feature,bin,value\n");
            for (i, b) in bundles.iter().enumerate() {
                for &f in &features {
                    let view = b.get(f).ok_or_else(|| {
                        Failure::Compute(csiqa::Error::Incompatible(format!(
                            "feature '{f}' unavailable"
                        )))
                    })?;
                    for (k, v) in view.as_slice().iter().enumerate() {
                        s.push_str(&format!("{i},{f},{k},{v}\n"));
                    }
                }
            }
            s
        }
    };
    emit(a.output.out.as_deref(), &text)
}

fn report_csv(report: &csiqa::QualityReport, measure: &str) -> String {
    let mut s = String::from("feature,measure,raw,normalized\n");
    for (f, raw) in &report.per_feature {
        s.push_str(&format!("{f},{measure},{raw},{}\n", report.normalized[f]));
    }
    s.push_str(&format!("aggregate,{measure},,{}\n", report.aggregate));
    s
}

fn cmd_similarity(a: &SimilarityArgs) -> CliResult<()> {
    require_file(&a.x)?;
    require_file(&a.y)?;
    let features = a.feature.features();
    let cfg = SimilarityConfig {
        features: features.clone(),
        distance: a.feature.distance,
        measure: a.measure.measure(),
        rule: rule_for(a.measure.rule, &features),
        normalization: Normalization::MinMax,
        normalize_max: a.feature.normalize_max,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let (x, y) = (load(&a.x)?, load(&a.y)?);
    let report = similarity_report(&x, &y, &cfg)?;
    let text = match a.output.format {
        Format::Json => pretty(&report)?,
        Format::Csv => report_csv(&report, cfg.measure.name()),
    };
    emit(a.output.out.as_deref(), &text)
}

fn cmd_diversity(a: &DiversityArgs) -> CliResult<()> {
    require_file(&a.dataset)?;
    let features = a.feature.features();
    let cfg = a.spread.config(
        &features,
        a.feature.distance,
        a.rule,
        a.feature.normalize_max,
    );
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let d = load(&a.dataset)?;
    let report = diversity_report(&d, &cfg)?;
    let text = match a.output.format {
        Format::Json => pretty(&report)?,
        Format::Csv => {
            let mut s = String::from("feature,measure,raw,normalized\n");
            for (f, raw) in &report.per_feature {
                s.push_str(&format!(
                    "{f},{},{raw},{}\n",
                    cfg.measures[f].name(),
                    report.normalized[f]
                ));
            }
            s.push_str(&format!("aggregate,,,{}\n", report.aggregate));
            s
        }
    };
    emit(a.output.out.as_deref(), &text)
}

fn expand_glob(pattern: &str) -> CliResult<Vec<PathBuf>> {
    let paths = glob::glob(pattern).map_err(|e| usage(format!("bad glob '{pattern}': {e}")))?;
    let mut out: Vec<PathBuf> = paths
        .filter_map(|p| p.ok())
        .filter(|p| p.is_file())
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(usage(format!("no files match '{pattern}'")));
    }
    Ok(out)
}

fn cmd_select(a: &SelectArgs) -> CliResult<()> {
    require_file(&a.reference)?;
    let paths = expand_glob(&a.candidates)?;
    let selector = match (a.k, a.threshold) {
        (Some(k), _) if k == 0 || k > paths.len() => {
            return Err(usage(format!("--k must lie in 1..={}", paths.len())));
        }
        (Some(k), _) => Selector::TopK(k),
        (None, Some(t)) => Selector::Threshold(t),
        (None, None) => return Err(usage("one of --k or --threshold is required")),
    };
    let features = a.feature.features();
    let cfg = SelectionConfig {
        features: features.clone(),
        distance: a.feature.distance,
        measure: a.measure.measure(),
        rule: rule_for(a.measure.rule, &features),
        selector,
        normalize_max: a.feature.normalize_max,
    };
    cfg.measure.validate().map_err(|e| usage(e.to_string()))?;
    let reference = load(&a.reference)?;
    let candidates = paths
        .iter()
        .map(|p| load(p))
        .collect::<CliResult<Vec<_>>>()?;
    let result = augment_select(&reference, &candidates, &cfg)?;
    let names: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    let text = match a.output.format {
        Format::Json => pretty(&json!({
            "reference": a.reference.display().to_string(),
            "candidates": names,
            "selected_paths": result.selected.iter().map(|&i| &names[i]).collect::<Vec<_>>(),
            "selection": result,
        }))?,
        Format::Csv => {
            let mut s = String::from("rank,candidate,path,aggregate,selected\n");
            for (rank, d) in result.differences.iter().enumerate() {
                let chosen = result.selected.contains(&d.index);
                s.push_str(&format!(
                    "{rank},{},{},{},{chosen}\n",
                    d.index, names[d.index], d.aggregate
                ));
            }
            s
        }
    };
    emit(a.output.out.as_deref(), &text)
}

struct Row {
    left: String,
    right: Option<String>,
    feature: FeatureKind,
    measure: String,
    raw: f64,
    normalized: f64,
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    if !a.corpus.is_dir() {
        return Err(usage(format!("{} is not a directory", a.corpus.display())));
    }
    let pattern = a.corpus.join("*.csid");
    let paths = expand_glob(&pattern.to_string_lossy())?;
    let names: Vec<String> = paths.iter().map(|p| stem(p)).collect();
    let features = a.feature.features();
    let bundles: Vec<Vec<FeatureBundle>> = paths
        .iter()
        .map(|p| {
            let mut d = load(p)?;
            if a.feature.normalize_max {
                d = d.normalized_by_max()?;
            }
            Ok(extract_features(&d)?)
        })
        .collect::<CliResult<_>>()?;

    let mut rows: Vec<Row> = Vec::new();
    match a.mode {
        SweepMode::Similarity => {
            if paths.len() < 2 {
                return Err(usage("a similarity sweep needs at least two datasets"));
            }
            let name = a.measure.as_deref().unwrap_or("wasserstein");
            let measure = MeasureArgs {
                measure: SetMeasure::from_str(name, false).map_err(|_| {
                    usage(format!(
                        "invalid measure '{name}' [possible values: mean, mmd, nnca, wasserstein]"
                    ))
                })?,
                p: a.p,
                bandwidth: a.bandwidth,
                rule: Rule::Average,
            }
            .measure();
            measure.validate().map_err(|e| usage(e.to_string()))?;
            let pairs: Vec<(usize, usize)> = (0..paths.len())
                .flat_map(|i| (i + 1..paths.len()).map(move |j| (i, j)))
                .collect();
            for &f in &features {
                let raw = pairs
                    .par_iter()
                    .map(|&(i, j)| {
                        feature_difference(&bundles[i], &bundles[j], f, a.feature.distance, measure)
                    })
                    .collect::<csiqa::Result<Vec<f64>>>()?;
                let norm = workflow::normalize_scores(&raw)?;
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    rows.push(Row {
                        left: names[i].clone(),
                        right: Some(names[j].clone()),
                        feature: f,
                        measure: measure.to_string(),
                        raw: raw[k],
                        normalized: norm[k],
                    });
                }
            }
        }
        SweepMode::Diversity => {
            let name = a.measure.as_deref().unwrap_or("distance");
            let spread = SpreadArgs {
                measure: SpreadMeasure::from_str(name, false).map_err(|_| {
                    usage(format!(
                        "invalid measure '{name}' [possible values: distance, dpp, compression]"
                    ))
                })?,
                bins: a.bins,
                bandwidth: a.bandwidth,
                jitter: a.jitter,
                quality: a.quality,
            };
            for &f in &features {
                let m = spread.measure_for(f, a.feature.distance);
                m.validate().map_err(|e| usage(e.to_string()))?;
                let raw = bundles
                    .par_iter()
                    .map(|b| feature_diversity(b, f, &m))
                    .collect::<csiqa::Result<Vec<f64>>>()?;
                let norm = workflow::normalize_scores(&raw)?;
                for (k, name) in names.iter().enumerate() {
                    rows.push(Row {
                        left: name.clone(),
                        right: None,
                        feature: f,
                        measure: m.name().to_string(),
                        raw: raw[k],
                        normalized: norm[k],
                    });
                }
            }
        }
    }
    rows.sort_by(|x, y| (&x.left, &x.right, x.feature).cmp(&(&y.left, &y.right, y.feature)));

    let text = match a.format {
        Format::Csv => {
            let mut s = match a.mode {
                SweepMode::Similarity => {
                    String::from("dataset_i,dataset_j,feature,measure,raw,normalized\n")
                }
                SweepMode::Diversity => String::from("dataset,feature,measure,raw,normalized\n"),
            };
            for r in &rows {
                let head = match &r.right {
                    Some(right) => format!("{},{right}", r.left),
                    None => r.left.clone(),
                };
                s.push_str(&format!(
                    "{head},{},{},{},{}\n",
                    r.feature, r.measure, r.raw, r.normalized
                ));
            }
            s
        }
        Format::Json => {
            let records: Vec<Value> = rows
                .iter()
                .map(|r| match &r.right {
                    Some(right) => {
                        json!({"dataset_i": r.left, "dataset_j": right, "feature": r.feature,
                        "measure": r.measure, "raw": r.raw, "normalized": r.normalized})
                    }
                    None => json!({"dataset": r.left, "feature": r.feature, "measure": r.measure,
                        "raw": r.raw, "normalized": r.normalized}),
                })
                .collect();
            pretty(&records)?
        }
    };
    emit(a.out.as_deref(), &text)
}
