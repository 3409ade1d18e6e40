use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use indexmap::IndexMap;

use muce::cli::{CliError, ErrorCategory, ModelSpec, Tag};
use muce::error::Error;
use muce::feature::Observation;
use muce::grid::{fit_grid_with, ExplanationGrid, GridConfig, OrderingMode};
use muce::indices::summarize_observation;
use muce::io::{parse_observation, read_dataset, read_numeric_csv, write_dataset};
use muce::muce::MuceConfig;
use muce::plot::emit_plots;
use muce::report::{indices_csv, indices_table, ExplanationReport};
use muce::synth::{
    generate_cross_2d, generate_ellipsoid_3d, transform_housing_with, CrossGeometry,
    EllipsoidGeometry, HousingTransformConfig,
};

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "muce", version, about = "Local stability and uncertainty indices for binary classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an explanation grid from a CSV dataset with a schema sidecar.
    GridFit(GridFitArgs),
    /// Explain one observation: report JSON, index tables and plots.
    Explain(ExplainArgs),
    /// Print the index table only (no files written).
    Indices(IndicesArgs),
    /// Redraw every plot from a saved report.
    Replot(ReplotArgs),
    /// Synthetic and real-data dataset helpers.
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Args)]
struct GridFitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Schema sidecar; defaults to `<data stem>.schema.json`.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    n_grid: usize,
    #[arg(long, default_value_t = 0.05)]
    stability_fraction: f64,
    #[arg(long, default_value_t = 5)]
    k_categories: usize,
    /// Store category centroids instead of every encoded training row.
    #[arg(long)]
    centroids: bool,
}

#[derive(Args)]
struct ExplainInputs {
    #[arg(long)]
    grid: PathBuf,
    /// constant:P | cross[:S] | ellipsoid[:S] | knn:K | exec:COMMAND
    #[arg(long)]
    model: String,
    /// Labelled training data for knn models.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Observation as name=value pairs (repeatable).
    #[arg(long = "obs", value_name = "NAME=VALUE")]
    obs: Vec<String>,
    /// Take the observation from this row (0-based) of --data.
    #[arg(long, requires = "data")]
    row: Option<usize>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Re-derive every stability range from this fraction of the observed range.
    #[arg(long)]
    stability_fraction: Option<f64>,
    /// Stability half-width override, NAME=DELTA (repeatable).
    #[arg(long = "delta", value_name = "NAME=DELTA")]
    delta: Vec<String>,
    /// MUCE step override, NAME=EPSILON (repeatable).
    #[arg(long = "epsilon", value_name = "NAME=EPSILON")]
    epsilon: Vec<String>,
    #[arg(long, default_value_t = 11)]
    n_local: usize,
    #[arg(long = "muce-n", default_value_t = 10)]
    muce_n: usize,
    #[arg(long, default_value_t = 5)]
    t1: usize,
    #[arg(long, default_value_t = 1)]
    ti: usize,
    #[arg(long, env = "MUCE_RESTARTS", default_value_t = 0)]
    restarts: usize,
    #[arg(long, env = "MUCE_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    inputs: ExplainInputs,
    #[arg(long, default_value = "explanation")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct IndicesArgs {
    #[command(flatten)]
    inputs: ExplainInputs,
    /// Print full-precision CSV instead of the rounded table.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct ReplotArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// 2D cross dataset.
    GenCross(GenArgs),
    /// 3D ellipsoid dataset.
    GenEllipsoid(GenArgs),
    /// Seven-feature mixed-type dataset from the raw housing CSV.
    TransformHousing(HousingArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 132)]
    positives: usize,
    #[arg(long, env = "MUCE_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct HousingArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    low_pct: f64,
    #[arg(long, default_value_t = 95.0)]
    high_pct: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.category.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GridFit(args) => grid_fit(args),
        Command::Explain(args) => explain(args),
        Command::Indices(args) => indices(args),
        Command::Replot(args) => replot(args),
        Command::Dataset(cmd) => dataset(cmd),
    }
}

fn grid_fit(args: GridFitArgs) -> CliResult<()> {
    let data = read_dataset(&args.data, args.schema.as_deref()).tag(ErrorCategory::BadData)?;
    let config = GridConfig {
        n_grid: args.n_grid,
        stability_fraction: args.stability_fraction,
        k_categories: args.k_categories,
        ordering: if args.centroids {
            OrderingMode::Centroids
        } else {
            OrderingMode::Neighbors
        },
    };
    let grid = fit_grid_with(&data, &config).tag(ErrorCategory::Usage)?;
    grid.save(&args.out).tag(ErrorCategory::Io)?;
    println!("grid: {} features from {} rows -> {}", grid.schema().len(), data.len(), args.out.display());
    Ok(())
}

fn named_numbers(pairs: &[String], what: &str) -> CliResult<Vec<(String, f64)>> {
    pairs
        .iter()
        .map(|p| {
            let parsed = p
                .split_once('=')
                .and_then(|(n, v)| v.trim().parse::<f64>().ok().map(|v| (n.trim().to_string(), v)));
            parsed.ok_or_else(|| {
                CliError::new(ErrorCategory::Usage, Error::InvalidConfig(format!("{what} expects NAME=NUMBER, got `{p}`")))
            })
        })
        .collect()
}

struct Prepared {
    grid: ExplanationGrid,
    model: Box<dyn muce::Predictor>,
    obs: Observation,
    config: MuceConfig,
    environment: IndexMap<String, String>,
}

fn prepare(inputs: &ExplainInputs) -> CliResult<Prepared> {
    let mut grid = ExplanationGrid::load(&inputs.grid).tag(ErrorCategory::BadGrid)?;
    if let Some(f) = inputs.stability_fraction {
        grid.set_stability_fraction(f).tag(ErrorCategory::Usage)?;
    }
    for (name, delta) in named_numbers(&inputs.delta, "--delta")? {
        grid.set_delta(&name, delta).tag(ErrorCategory::Usage)?;
    }

    let train = match &inputs.train {
        Some(path) => Some(read_dataset(path, None).tag(ErrorCategory::BadData)?),
        None => None,
    };
    let model = ModelSpec::parse(&inputs.model)
        .and_then(|spec| spec.build(grid.schema(), train.as_ref()))
        .tag(ErrorCategory::BadModel)?;

    let obs = match (inputs.row, &inputs.data) {
        (Some(row), Some(path)) => {
            if !inputs.obs.is_empty() {
                return Err(CliError::new(
                    ErrorCategory::Usage,
                    Error::InvalidConfig("give either --obs or --row, not both".into()),
                ));
            }
            let data = read_dataset(path, None).tag(ErrorCategory::BadData)?;
            if data.schema() != grid.schema() {
                return Err(CliError::new(
                    ErrorCategory::BadObservation,
                    Error::SchemaMismatch("dataset schema differs from the grid schema".into()),
                ));
            }
            data.rows().get(row).cloned().ok_or_else(|| {
                CliError::new(
                    ErrorCategory::BadObservation,
                    Error::InvalidConfig(format!("row {row} out of range ({} rows)", data.len())),
                )
            })?
        }
        _ => parse_observation(grid.schema(), &inputs.obs).tag(ErrorCategory::BadObservation)?,
    };

    let mut config = MuceConfig::new(inputs.muce_n, inputs.t1, inputs.ti);
    config.n_local = inputs.n_local;
    config.restarts = inputs.restarts;
    config.seed = inputs.seed;
    config.epsilon = named_numbers(&inputs.epsilon, "--epsilon")?.into_iter().collect();
    config.validate().tag(ErrorCategory::Usage)?;

    let environment = ["MUCE_SEED", "MUCE_RESTARTS"]
        .iter()
        .filter_map(|k| std::env::var(k).ok().map(|v| (k.to_string(), v)))
        .collect();
    Ok(Prepared {
        grid,
        model,
        obs,
        config,
        environment,
    })
}

fn compute_report(inputs: &ExplainInputs) -> CliResult<ExplanationReport> {
    let p = prepare(inputs)?;
    let work = || {
        let summary = summarize_observation(&p.grid, &p.obs, &p.model, &p.config).tag(ErrorCategory::BadObservation)?;
        ExplanationReport::build(&p.grid, &p.obs, &p.model, &summary, &p.config, p.environment.clone())
            .tag(ErrorCategory::BadObservation)
    };
    match inputs.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::new(ErrorCategory::Usage, Error::InvalidConfig(e.to_string())))?
            .install(work),
        None => work(),
    }
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::new(ErrorCategory::Io, e.into()))
}

fn write_outputs(report: &ExplanationReport, dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::new(ErrorCategory::Io, e.into()))?;
    write(&dir.join("report.json"), &report.to_json().tag(ErrorCategory::Io)?)?;
    write(&dir.join("indices.csv"), &report.indices_csv())?;
    write(&dir.join("variation.csv"), &report.variation_csv())?;
    emit_plots(report, dir).tag(ErrorCategory::Io)?;
    Ok(())
}

fn explain(args: ExplainArgs) -> CliResult<()> {
    let report = compute_report(&args.inputs)?;
    write_outputs(&report, &args.out_dir)?;
    print!("{}", report.indices_table());
    Ok(())
}

fn indices(args: IndicesArgs) -> CliResult<()> {
    let report = compute_report(&args.inputs)?;
    let rows = report.features.iter().map(|f| &f.indices);
    if args.csv {
        print!("{}", indices_csv(rows));
    } else {
        print!("{}", indices_table(rows));
    }
    Ok(())
}

fn replot(args: ReplotArgs) -> CliResult<()> {
    let report = ExplanationReport::load(&args.report).tag(ErrorCategory::BadData)?;
    write_outputs(&report, &args.out_dir)
}

fn dataset(cmd: DatasetCommand) -> CliResult<()> {
    let (data, out) = match cmd {
        DatasetCommand::GenCross(a) => (
            generate_cross_2d(a.n, a.positives, &CrossGeometry::default(), a.seed).tag(ErrorCategory::Usage)?,
            a.out,
        ),
        DatasetCommand::GenEllipsoid(a) => (
            generate_ellipsoid_3d(a.n, a.positives, &EllipsoidGeometry::default(), a.seed).tag(ErrorCategory::Usage)?,
            a.out,
        ),
        DatasetCommand::TransformHousing(a) => {
            let raw = read_numeric_csv(&a.input).tag(ErrorCategory::BadData)?;
            let config = HousingTransformConfig {
                low_pct: a.low_pct,
                high_pct: a.high_pct,
                ..HousingTransformConfig::default()
            };
            (transform_housing_with(&raw, &config).tag(ErrorCategory::BadData)?, a.out)
        }
    };
    write_dataset(&data, &out).tag(ErrorCategory::Io)?;
    println!("{} rows -> {}", data.len(), out.display());
    Ok(())
}
