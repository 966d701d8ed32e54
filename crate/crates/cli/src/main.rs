use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use mrftrack::harness::{
    apply_overrides, compare, evaluate_estimates, metrics_csv, scale_failures, RunConfig, TrackerSetting,
};
use mrftrack::simulator::{make_crossing_scenario, ScenarioConfig, Simulation};
use mrftrack::tracks::PoseTrack;
use mrftrack::Error;

/// Simulate interacting agents and track them with MCMC-MRF or independent
/// particle filters.
#[derive(Parser)]
#[command(name = "mrftrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scenario to PGM frames plus groundtruth.csv.
    Simulate(SimulateArgs),
    /// Run one tracker configuration.
    Run(RunArgs),
    /// Run a matrix of tracker settings over several seeds.
    Compare(CompareArgs),
    /// Recompute metrics from stored estimates and groundtruth.
    Eval(EvalArgs),
}

#[derive(Args)]
struct Overrides {
    /// Field overrides, `--key value` or `--key=value`; dotted keys reach
    /// nested tables (`--motion.sigma_x 4`).
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    raw: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (a bare scenario, or a run config with a [scenario] table).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Two agents on perpendicular courses meeting mid-arena.
    #[arg(long)]
    crossing: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated `kind:particles` list.
    #[arg(long, value_delimiter = ',', required = true)]
    settings: Vec<TrackerSetting>,
    /// Seeds as a list (`1,2,3`) or half-open range (`0..20`).
    #[arg(long, default_value = "0..20")]
    seeds: String,
    /// Directory for per-cell outputs, table.csv and summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct EvalArgs {
    /// estimates.csv written by `run`.
    #[arg(long)]
    estimates: PathBuf,
    #[arg(long)]
    groundtruth: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    failure_threshold: f64,
    #[arg(long, default_value_t = 10_400)]
    reference_frames: u64,
    /// Write per-target metrics here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_overrides(raw: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = raw.iter();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            bail!("expected --key value, found {arg:?}");
        };
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let value = it.next().with_context(|| format!("--{key} needs a value"))?;
                out.push((key.to_string(), value.clone()));
            }
        }
    }
    Ok(out)
}

fn load_run_config(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<RunConfig> {
    let overrides = parse_overrides(&overrides.raw)?;
    Ok(match path {
        Some(p) => RunConfig::load(p, &overrides)?,
        None => RunConfig::from_toml_with_overrides("", &overrides)?,
    })
}

fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a >= b {
            bail!("empty seed range {text:?}");
        }
        return Ok((a..b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed {s:?}")))
        .collect()
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let mut table = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            let mut t: toml::Table =
                toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", p.display())))?;
            match t.remove("scenario") {
                Some(toml::Value::Table(s)) => s,
                Some(_) => return Err(Error::config("scenario must be a table").into()),
                None => t,
            }
        }
        None => toml::Table::new(),
    };
    apply_overrides(&mut table, &parse_overrides(&args.overrides.raw)?)?;
    let mut cfg: ScenarioConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::config(format!("scenario: {e}")))?;
    if args.crossing {
        cfg = make_crossing_scenario(cfg);
    }
    cfg.validate()?;
    let track = Simulation::write_to_dir(&cfg, &args.out)?;
    let echo = toml::to_string_pretty(&cfg).expect("scenario serializes");
    std::fs::write(args.out.join("scenario.toml"), echo).map_err(|e| Error::Io {
        path: args.out.join("scenario.toml"),
        source: e,
    })?;
    println!(
        "wrote {} frames of {} agents to {}",
        track.n_frames(),
        track.n_targets(),
        args.out.display()
    );
    Ok(())
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let cfg = load_run_config(args.config.as_deref(), &args.overrides)?;
    let report = mrftrack::harness::run_experiment(&cfg)?;
    println!("{}", mrftrack::harness::SUMMARY_HEADER);
    println!("{}", report.summary_row());
    if let Some(out) = &cfg.output_dir {
        log::info!("outputs in {}", out.display());
    }
    Ok(())
}

fn run_compare(args: CompareArgs) -> anyhow::Result<()> {
    let cfg = load_run_config(args.config.as_deref(), &args.overrides)?;
    let seeds = parse_seeds(&args.seeds)?;
    let comparison = compare(&cfg, &args.settings, &seeds, args.out.as_deref())?;
    print!("{}", comparison.table_text(cfg.reference_frames));
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    if !(args.failure_threshold > 0.0) {
        return Err(Error::config(format!("failure_threshold must be positive, got {}", args.failure_threshold)).into());
    }
    let estimates = PoseTrack::load(&args.estimates)?;
    let truth = PoseTrack::load(&args.groundtruth)?;
    let metrics = evaluate_estimates(&estimates, &truth, args.failure_threshold)?;
    let csv = metrics_csv(&metrics);
    match &args.out {
        Some(path) => std::fs::write(path, &csv).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?,
        None => print!("{csv}"),
    }
    let failures: usize = metrics.iter().map(|m| m.failures()).sum();
    let all: Vec<f64> = metrics.iter().flat_map(|m| m.distances.iter().copied()).collect();
    let mean = all.iter().sum::<f64>() / all.len().max(1) as f64;
    eprintln!(
        "frames {}  failures {}  equivalent {}  mean dist {:.3} px",
        metrics.len(),
        failures,
        scale_failures(failures as u64, metrics.len().max(1) as u64, args.reference_frames),
        mean
    );
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>().map(Error::category) {
        Some("config") => 2,
        Some("io") => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Run(a) => run(a),
        Command::Compare(a) => run_compare(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let category = err.downcast_ref::<Error>().map(Error::category).unwrap_or("error");
            eprintln!("mrftrack: {category} error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
