use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use csymmpi::harness::{BaselineMethod, CoverageReport};
use csymmpi_cli::predict::{calibrate, predict, Inputs, IntervalMethod, LayoutKind, PredictConfig};
use csymmpi_cli::simulate::{
    load_experiment, render_full, run_simulation, thread_pool, write_json, write_records_csv,
    write_report_csv,
};

#[derive(Parser)]
#[command(
    name = "csymmpi",
    version,
    about = "Conditional prediction intervals under group symmetry"
)]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "CSYMMPI_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the two-layer coverage experiment.
    Simulate(SimulateArgs),
    /// Prediction intervals for every row with an empty `y`.
    Predict(PredictArgs),
    /// Fit and save the threshold function for the first target.
    Calibrate(CalibrateArgs),
    /// Render a saved JSON report as markdown tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON report path (overrides `output.json`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat CSV summary path (overrides `output.csv`).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-repetition records as CSV.
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Restrict to these methods (repeatable), e.g. `csymmpi`, `symmpi`.
    #[arg(long = "method")]
    methods: Vec<String>,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, value_enum)]
    layout: LayoutKind,
    /// Calibration CSV; rows with an empty `y` are targets.
    #[arg(long)]
    data: PathBuf,
    /// Edge list `source,target` for network data.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Training CSV with the same columns, used to fit the point predictor.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    train_edges: Option<PathBuf>,
    /// CRT target: `CLUSTER` for the cluster effect, `CLUSTER:ROW` for an individual.
    #[arg(long)]
    target: Option<String>,
    /// TOML prediction config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<IntervalMethod>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Test score plugged into the target slot; defaults to the boundary score.
    #[arg(long)]
    s_test: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON report written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    /// Markdown output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut config = load_experiment(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(eps) = args.eps {
        config.eps = eps;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(r) = args.reps {
        config.reps = r;
    }
    if !args.methods.is_empty() {
        config.methods = args
            .methods
            .iter()
            .map(|m| m.parse::<BaselineMethod>())
            .collect::<Result<_, _>>()?;
    }
    if args.out.is_some() {
        config.output.json = args.out;
    }
    if args.csv.is_some() {
        config.output.csv = args.csv;
    }
    config.validate()?;
    log::info!(
        "running {} trials x {} reps, seed {}",
        config.trials,
        config.reps,
        config.seed
    );
    let (records, report) = run_simulation(&config)?;
    if let Some(path) = &config.output.json {
        write_json(&report, path)?;
    }
    if let Some(path) = &config.output.csv {
        write_report_csv(&report, path)?;
    }
    if let Some(path) = &args.records {
        write_records_csv(&records, path)?;
    }
    print!("{}", render_full(&report));
    Ok(())
}

fn inputs_and_config(args: &DataArgs) -> Result<(Inputs, PredictConfig)> {
    let mut config = PredictConfig::load(args.config.as_deref())?;
    if let Some(m) = args.method {
        config.method = m;
    }
    if let Some(a) = args.alpha {
        config.alpha = a;
    }
    if let Some(e) = args.eps {
        config.eps = e;
    }
    config.validate()?;
    let inputs = Inputs {
        layout: args.layout,
        data: args.data.clone(),
        edges: args.edges.clone(),
        train: args.train.clone(),
        train_edges: args.train_edges.clone(),
        crt_target: args.target.clone(),
    };
    Ok((inputs, config))
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&std::path::Path>) -> Result<()> {
    match out {
        Some(path) => write_json(value, path),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let pool = thread_pool(cli.threads)?;
    match cli.command {
        Command::Simulate(args) => pool.install(|| simulate(args)),
        Command::Predict(args) => {
            let (inputs, config) = inputs_and_config(&args.data)?;
            emit(&predict(&inputs, &config)?, args.data.out.as_deref())
        }
        Command::Calibrate(args) => {
            let (inputs, config) = inputs_and_config(&args.data)?;
            emit(
                &calibrate(&inputs, &config, args.s_test)?,
                args.data.out.as_deref(),
            )
        }
        Command::Report(args) => {
            let text = std::fs::read_to_string(&args.input)
                .with_context(|| format!("reading {}", args.input.display()))?;
            let report: CoverageReport =
                serde_json::from_str(&text).context("parsing the report")?;
            let md = render_full(&report);
            match args.out {
                Some(path) => {
                    std::fs::write(&path, md).with_context(|| format!("writing {}", path.display()))
                }
                None => {
                    print!("{md}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // 2 for bad configuration or input data
            let usage = matches!(
                e.downcast_ref::<csymmpi::Error>(),
                Some(csymmpi::Error::Config(_) | csymmpi::Error::Data(_))
            );
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
