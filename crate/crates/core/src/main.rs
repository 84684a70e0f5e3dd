use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sesd::decompose::{self, StlConfig, Variant};
use sesd::detect::{Algorithm, AnomalyReport, DetectorConfig, Direction};
use sesd::eval::{self, InjectionSpec};
use sesd::series::{self, CsvSchema, TimeSeries};

const EXIT_ERROR: u8 = 1;
const EXIT_ANOMALIES: u8 = 2;
const EXIT_REPORT_GENERATED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sesd",
    about = "Seasonal (hybrid) ESD anomaly detection for metric time series",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect anomalies and write annotated CSV plus a JSON summary.
    Detect(DetectArgs),
    /// Decompose a series into seasonal, trend, and residual columns.
    Decompose(DecomposeArgs),
    /// Smooth a series with a B-spline and inject labeled anomalies.
    Inject(InjectArgs),
    /// Score detections against labels, or run an inject-then-detect corpus.
    Evaluate(EvaluateArgs),
    /// Production-style report: S-H-ESD over the trailing 14 days, written
    /// only when the final day contains anomalies.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    #[value(name = "three-sigma")]
    ThreeSigma,
    #[value(name = "grubbs")]
    Grubbs,
    #[value(name = "esd")]
    Esd,
    #[value(name = "s-esd")]
    SEsd,
    #[value(name = "s-h-esd")]
    SHEsd,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Algorithm {
        match a {
            AlgoArg::ThreeSigma => Algorithm::ThreeSigma,
            AlgoArg::Grubbs => Algorithm::Grubbs,
            AlgoArg::Esd => Algorithm::Esd,
            AlgoArg::SEsd => Algorithm::SEsd,
            AlgoArg::SHEsd => Algorithm::SHEsd,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Positive,
    Negative,
    Both,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Direction {
        match d {
            DirectionArg::Positive => Direction::Positive,
            DirectionArg::Negative => Direction::Negative,
            DirectionArg::Both => Direction::Both,
        }
    }
}

#[derive(Args)]
struct DetectorFlags {
    /// Detection algorithm.
    #[arg(long, value_enum, default_value = "s-h-esd")]
    algo: AlgoArg,
    /// Significance level in (0, 1).
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Maximum anomalous fraction in (0, 0.49].
    #[arg(long, default_value_t = 0.10)]
    max_anoms: f64,
    /// Report only positive, only negative, or both deviation signs.
    #[arg(long, value_enum, default_value = "both")]
    direction: DirectionArg,
    /// Samples per seasonal cycle; inferred from cadence when omitted.
    #[arg(long)]
    period: Option<usize>,
    /// Drop anomalies whose raw value is at or below this floor.
    #[arg(long)]
    threshold: Option<f64>,
}

impl DetectorFlags {
    fn to_config(&self) -> DetectorConfig {
        let mut config = DetectorConfig::new(self.algo.into());
        config.alpha = self.alpha;
        config.max_anoms = self.max_anoms;
        config.direction = self.direction.into();
        config.period = self.period;
        config.threshold = self.threshold;
        config
    }
}

#[derive(Args)]
struct DetectArgs {
    input: PathBuf,
    #[command(flatten)]
    detector: DetectorFlags,
    /// Restrict the analysis to the trailing D days.
    #[arg(long)]
    window_days: Option<u32>,
    /// Fill gaps of up to 10 missing samples by linear interpolation.
    #[arg(long)]
    repair: bool,
    /// Output prefix: writes <out>.csv and <out>.json.
    #[arg(long, default_value = "detect-out")]
    out: PathBuf,
    /// Exit with code 2 when anomalies were found.
    #[arg(long)]
    fail_on_anomaly: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Classic,
    Median,
}

#[derive(Args)]
struct DecomposeArgs {
    input: PathBuf,
    #[arg(long)]
    period: Option<usize>,
    /// Residual formula: classic (X−T−S) or median (X−S−median).
    #[arg(long, value_enum, default_value = "classic")]
    variant: VariantArg,
    #[arg(long)]
    repair: bool,
    /// Output CSV path (timestamp,value,seasonal,trend,residual).
    #[arg(long, default_value = "decomposition.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct InjectionFlags {
    /// Number of anomalies to inject.
    #[arg(long, default_value_t = 5)]
    count: usize,
    /// Anomaly magnitude range in residual-σ units.
    #[arg(long, default_value_t = 8.0)]
    mag_min: f64,
    #[arg(long, default_value_t = 12.0)]
    mag_max: f64,
    /// Anomaly width range in samples.
    #[arg(long, default_value_t = 1)]
    width_min: usize,
    #[arg(long, default_value_t = 1)]
    width_max: usize,
    /// Probability of a positive-signed anomaly.
    #[arg(long, default_value_t = 0.5)]
    direction_mix: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Minimum samples between injected intervals.
    #[arg(long, default_value_t = 3)]
    min_gap: usize,
    /// Samples per B-spline knot for the smoothing baseline.
    #[arg(long, default_value_t = 3)]
    knot_spacing: usize,
}

impl InjectionFlags {
    fn to_spec(&self) -> InjectionSpec {
        InjectionSpec {
            count: self.count,
            magnitude_range: (self.mag_min, self.mag_max),
            width_range: (self.width_min, self.width_max),
            direction_mix: self.direction_mix,
            seed: self.seed,
            min_gap: self.min_gap,
        }
    }
}

#[derive(Args)]
struct InjectArgs {
    input: PathBuf,
    #[command(flatten)]
    injection: InjectionFlags,
    #[arg(long)]
    repair: bool,
    /// Output prefix: writes <out>.csv and <out>_labels.csv.
    #[arg(long, default_value = "injected")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Series CSVs for corpus mode (with --inject).
    inputs: Vec<PathBuf>,
    /// Detection output CSV (timestamp,value,anomaly,score) to score directly.
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Ground-truth labels CSV (timestamp,label).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Run the inject-then-detect pipeline on the input series.
    #[arg(long)]
    inject: bool,
    #[command(flatten)]
    injection: InjectionFlags,
    /// Comma-separated detector list for corpus mode.
    #[arg(long, value_delimiter = ',', default_values = ["s-esd", "s-h-esd"])]
    algos: Vec<AlgoArg>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.10)]
    max_anoms: f64,
    #[arg(long)]
    period: Option<usize>,
    /// F_β weighting.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Index tolerance when matching detections to truth.
    #[arg(long, default_value_t = 0)]
    tolerance: usize,
    /// Worker threads for corpus cells (0 = rayon default).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    repair: bool,
    /// Results table CSV.
    #[arg(long, default_value = "evaluation.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    input: PathBuf,
    #[arg(long)]
    period: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.10)]
    max_anoms: f64,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    repair: bool,
    /// Output prefix: writes <out>.md and <out>_anomalies.csv when triggered.
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Serialize)]
struct AnomalyRecord {
    index: usize,
    timestamp: i64,
    value: f64,
    score: f64,
    direction: Direction,
}

#[derive(Serialize)]
struct RunSummary {
    schema_version: u32,
    config: DetectorConfig,
    series_len: usize,
    cadence_seconds: i64,
    period: usize,
    anomaly_count: usize,
    percent_anomalous: f64,
    anomalies: Vec<AnomalyRecord>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ANOMALY_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect(args) => cmd_detect(args),
        Command::Decompose(args) => cmd_decompose(args),
        Command::Inject(args) => cmd_inject(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn load(path: &Path, repair: bool) -> Result<TimeSeries, Box<dyn std::error::Error>> {
    let schema = CsvSchema {
        repair,
        ..CsvSchema::default()
    };
    Ok(series::load_csv(path, &schema)?)
}

fn cmd_detect(args: DetectArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut ts = load(&args.input, args.repair)?;
    if let Some(days) = args.window_days {
        ts = ts.tail_days(days);
    }
    let config = args.detector.to_config();
    let report = config.run(&ts)?;
    write_detection_outputs(&ts, &report, &args.out)?;
    log::info!(
        "{} anomalies in {} points ({:.3}%)",
        report.len(),
        ts.len(),
        report.percent_anomalous
    );
    if args.fail_on_anomaly && !report.is_empty() {
        return Ok(ExitCode::from(EXIT_ANOMALIES));
    }
    Ok(ExitCode::SUCCESS)
}

fn write_detection_outputs(
    ts: &TimeSeries,
    report: &AnomalyReport,
    out: &Path,
) -> Result<(), Box<dyn std::error::Error>> {
    let mut anomaly = vec![false; ts.len()];
    let mut score = vec![0.0; ts.len()];
    for (k, &i) in report.indices.iter().enumerate() {
        anomaly[i] = true;
        score[i] = report.scores[k];
    }
    series::write_csv(
        ts,
        Some(series::AnnotatedFlags {
            anomaly: &anomaly,
            score: &score,
        }),
        &out.with_extension("csv"),
    )?;

    let period = series::infer_period(ts, report.config.period).unwrap_or(0);
    let summary = RunSummary {
        schema_version: 1,
        config: report.config.clone(),
        series_len: ts.len(),
        cadence_seconds: ts.cadence(),
        period,
        anomaly_count: report.len(),
        percent_anomalous: report.percent_anomalous,
        anomalies: (0..report.len())
            .map(|k| AnomalyRecord {
                index: report.indices[k],
                timestamp: report.timestamps[k],
                value: report.values[k],
                score: report.scores[k],
                direction: report.directions[k],
            })
            .collect(),
    };
    std::fs::write(
        out.with_extension("json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

fn cmd_decompose(args: DecomposeArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let ts = load(&args.input, args.repair)?;
    let period = series::infer_period(&ts, args.period)?;
    let stl = decompose::stl_decompose(&ts, &StlConfig::new(period))?;
    let d = match args.variant {
        VariantArg::Classic => stl,
        VariantArg::Median => decompose::median_residual(&ts, &stl)?,
    };
    let mut out = String::from("timestamp,value,seasonal,trend,residual\n");
    for i in 0..ts.len() {
        // Under the median variant the series median stands in for the trend,
        // preserving value = seasonal + trend + residual row-wise.
        let trend = match d.variant {
            Variant::ClassicResidual => d.trend[i],
            Variant::MedianResidual => d.series_median,
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            ts.timestamps()[i],
            ts.values()[i],
            d.seasonal[i],
            trend,
            d.residual[i]
        ));
    }
    std::fs::write(&args.out, out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_inject(args: InjectArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let ts = load(&args.input, args.repair)?;
    let baseline = eval::bspline_smooth(&ts, args.injection.knot_spacing)?;
    let sigma = residual_sigma(&ts, &baseline);
    let labeled = eval::inject(&baseline, sigma, &args.injection.to_spec())?;

    series::write_csv(&labeled.series, None, &args.out.with_extension("csv"))?;
    let mut labels_out = String::from("timestamp,label\n");
    for (t, l) in labeled.series.timestamps().iter().zip(&labeled.labels) {
        labels_out.push_str(&format!("{t},{}\n", u8::from(*l)));
    }
    let labels_path = labels_path(&args.out);
    std::fs::write(labels_path, labels_out)?;
    Ok(ExitCode::SUCCESS)
}

fn labels_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}_labels.csv"))
}

fn residual_sigma(raw: &TimeSeries, baseline: &TimeSeries) -> f64 {
    let diff: Vec<f64> = raw
        .values()
        .iter()
        .zip(baseline.values())
        .map(|(a, b)| a - b)
        .collect();
    sesd::stats::mean_std(&diff).map(|(_, s)| s).unwrap_or(0.0)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    if args.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build_global()
            .ok();
    }
    if args.inject {
        evaluate_corpus(&args)
    } else {
        evaluate_files(&args)
    }
}

fn evaluate_files(args: &EvaluateArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let detections_path = args
        .detections
        .as_ref()
        .ok_or("either --inject or both --detections and --labels are required")?;
    let labels_path = args
        .labels
        .as_ref()
        .ok_or("--labels is required with --detections")?;
    let schema = CsvSchema::default();
    let ts = series::load_csv(detections_path, &schema)?;
    let detected = load_flag_column(detections_path, &ts)?;
    let labels = series::load_labels(labels_path, &ts)?;
    let truth: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, &l)| l.then_some(i))
        .collect();
    let metrics = eval::score(&detected, &truth, ts.len(), args.beta, args.tolerance);
    let rows = vec![eval::CorpusRow {
        series: detections_path.to_string_lossy().into_owned(),
        detector: "file".into(),
        metrics,
    }];
    write_results_table(&rows, &[], &args.out)?;
    print_rows(&rows);
    Ok(ExitCode::SUCCESS)
}

/// Indices with a 1 in the `anomaly` column of a detect-output CSV.
fn load_flag_column(
    path: &Path,
    ts: &TimeSeries,
) -> Result<Vec<usize>, Box<dyn std::error::Error>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = headers.iter().position(|h| h.trim() == "anomaly");
    let mut detected = Vec::new();
    if let Some(col) = col {
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            if record.get(col).map(str::trim) == Some("1") {
                detected.push(i.min(ts.len().saturating_sub(1)));
            }
        }
    }
    Ok(detected)
}

fn evaluate_corpus(args: &EvaluateArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    if args.inputs.is_empty() {
        return Err("corpus mode needs at least one input series".into());
    }
    let mut corpus = Vec::new();
    for path in &args.inputs {
        let ts = load(path, args.repair)?;
        corpus.push((path.to_string_lossy().into_owned(), ts));
    }
    let detectors: Vec<DetectorConfig> = args
        .algos
        .iter()
        .map(|&a| {
            let mut c = DetectorConfig::new(a.into());
            c.alpha = args.alpha;
            c.max_anoms = args.max_anoms;
            c.period = args.period;
            c
        })
        .collect();
    let result = eval::run_corpus(
        &corpus,
        &detectors,
        &args.injection.to_spec(),
        args.injection.knot_spacing,
        args.beta,
        args.tolerance,
    )?;
    write_results_table(&result.rows, &result.aggregates, &args.out)?;
    print_rows(&result.aggregates);
    Ok(ExitCode::SUCCESS)
}

fn write_results_table(
    rows: &[eval::CorpusRow],
    aggregates: &[eval::CorpusRow],
    out: &Path,
) -> Result<(), Box<dyn std::error::Error>> {
    let mut text = String::from("series,detector,tp,fp,fn,precision,recall,f_beta\n");
    for row in rows.iter().chain(aggregates) {
        let m = &row.metrics;
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.series, row.detector, m.tp, m.fp, m.fn_, m.precision, m.recall, m.f_beta
        ));
    }
    std::fs::write(out, text)?;
    Ok(())
}

fn print_rows(rows: &[eval::CorpusRow]) {
    for row in rows {
        let m = &row.metrics;
        println!(
            "{} {}: tp={} fp={} fn={} precision={:.4} recall={:.4} f_beta={:.4}",
            row.series, row.detector, m.tp, m.fp, m.fn_, m.precision, m.recall, m.f_beta
        );
    }
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let ts = load(&args.input, args.repair)?;
    let samples_per_day = (86_400 / ts.cadence()).max(1) as usize;
    if ts.len() < 14 * samples_per_day {
        return Err(format!(
            "series covers {} samples, need 14 days ({} samples)",
            ts.len(),
            14 * samples_per_day
        )
        .into());
    }
    let window = ts.tail_days(14);
    let mut config = DetectorConfig::new(Algorithm::SHEsd);
    config.alpha = args.alpha;
    config.max_anoms = args.max_anoms;
    config.period = args.period;
    config.threshold = args.threshold;
    let report = config.run(&window)?;

    // "Previous day" = trailing 24h from the last sample.
    let day_start = window.timestamps()[window.len() - samples_per_day.min(window.len())];
    let final_day: Vec<usize> = (0..report.len())
        .filter(|&k| report.timestamps[k] >= day_start)
        .collect();
    if final_day.is_empty() {
        log::info!("no anomalies in the final day; no report generated");
        println!("no anomalies in the final day");
        return Ok(ExitCode::SUCCESS);
    }

    let mut md = String::new();
    md.push_str("# Anomaly report\n\n");
    md.push_str(&format!(
        "- window: {} samples ending at epoch {}\n- algorithm: s-h-esd (alpha {})\n- anomalies in window: {} ({:.3}%)\n- anomalies in final day: {}\n\n",
        window.len(),
        window.timestamps()[window.len() - 1],
        config.alpha,
        report.len(),
        report.percent_anomalous,
        final_day.len()
    ));
    md.push_str("| timestamp | value | score |\n|---|---|---|\n");
    for &k in &final_day {
        md.push_str(&format!(
            "| {} | {} | {:.3} |\n",
            report.timestamps[k], report.values[k], report.scores[k]
        ));
    }
    std::fs::write(args.out.with_extension("md"), md)?;

    let mut anomaly = vec![false; window.len()];
    let mut score = vec![0.0; window.len()];
    for (k, &i) in report.indices.iter().enumerate() {
        anomaly[i] = true;
        score[i] = report.scores[k];
    }
    let stem = args.out.file_stem().unwrap_or_default().to_string_lossy();
    series::write_csv(
        &window,
        Some(series::AnnotatedFlags {
            anomaly: &anomaly,
            score: &score,
        }),
        &args.out.with_file_name(format!("{stem}_anomalies.csv")),
    )?;
    Ok(ExitCode::from(EXIT_REPORT_GENERATED))
}
