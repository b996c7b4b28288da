use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use qsocp::experiment::{self, plots, powerlaw, ExperimentSpec};
use qsocp::ipm::{self, IpmConfig, RunReport};
use qsocp::portfolio::{self, PortfolioProblem, ReturnsDataset, SyntheticMarket};
use qsocp::quantum::{self, NoiseMode, NoiseModel};
use qsocp::SocpInstance;

/// Exit status when a suite finished but some trials failed.
const PARTIAL_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "qsocp", version, about = "Interior-point SOCP solver with simulated quantum Newton steps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one portfolio (or raw SOCP) instance.
    Solve(SolveArgs),
    /// Run an experiment suite described by a JSON spec.
    Suite(SuiteArgs),
    /// Fit y = a x^b to a CSV of (x, y) points.
    Fit(FitArgs),
    /// Write a synthetic price CSV.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct Common {
    /// Target duality gap.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Tomography precision; 0 runs the exact method.
    #[arg(long)]
    delta: Option<f64>,
    /// Centering constant in sigma = 1 - chi / sqrt(r).
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (solve) or directory (suite).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Price CSV: date column then one column per asset.
    #[arg(long, conflicts_with_all = ["instance", "synthetic"])]
    prices: Option<PathBuf>,
    /// SOCP instance JSON, solved as is.
    #[arg(long, conflicts_with = "synthetic")]
    instance: Option<PathBuf>,
    /// Generate this many synthetic assets instead of reading prices.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 120)]
    days: usize,
    /// Target return; defaults to the midpoint of the attainable range.
    #[arg(long)]
    target: Option<f64>,
    /// Add the constraint sum(x) = 1.
    #[arg(long)]
    budget: bool,
    /// Scale the tomography precision to the required bound each iteration.
    #[arg(long)]
    adaptive: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SuiteArgs {
    spec: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with a header and two numeric columns.
    points: PathBuf,
    /// Drop this fraction of the largest y values before fitting.
    #[arg(long, default_value_t = 0.0)]
    trim: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 20)]
    assets: usize,
    #[arg(long, default_value_t = 250)]
    days: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Suite(args) => suite(args),
        Command::Fit(args) => fit(args),
        Command::Generate(args) => generate(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn noise_model(delta: f64, adaptive: bool, seed: u64) -> NoiseModel {
    if adaptive {
        NoiseModel::adaptive(delta, seed)
    } else {
        NoiseModel::fixed(delta, seed)
    }
}

fn run_instance(inst: &SocpInstance, config: &IpmConfig, common: &Common, adaptive: bool) -> anyhow::Result<RunReport> {
    let delta = common.delta.unwrap_or(0.0);
    let report = if delta > 0.0 {
        quantum::run_quantum(inst, config, &noise_model(delta, adaptive, common.seed.unwrap_or(0)))?
    } else {
        ipm::run(inst, config)?
    };
    Ok(report)
}

fn solve(args: SolveArgs) -> anyhow::Result<ExitCode> {
    let mut config = IpmConfig::default();
    if let Some(e) = args.common.epsilon {
        config.epsilon = e;
    }
    if let Some(c) = args.common.chi {
        config.chi = c;
    }

    if let Some(path) = &args.instance {
        let inst = SocpInstance::load_json(path)?;
        let report = run_instance(&inst, &config, &args.common, args.adaptive)?;
        eprintln!(
            "{:?} after {} iterations, objective {:.6e}",
            report.status, report.iterations, report.objective
        );
        write_or_print(args.common.out.as_deref(), &report.to_json()?)?;
        return Ok(if report.converged() { ExitCode::SUCCESS } else { ExitCode::FAILURE });
    }

    let data: ReturnsDataset = match (&args.prices, args.synthetic) {
        (Some(path), _) => {
            let (data, ingest) = portfolio::ingest_csv(path)?;
            if ingest.dropped_rows > 0 {
                log::warn!("dropped {} price rows with missing cells", ingest.dropped_rows);
            }
            data
        }
        (None, Some(assets)) => {
            let market = SyntheticMarket { assets, days: args.days, seed: args.common.seed.unwrap_or(0), ..Default::default() };
            ReturnsDataset::from_prices(&market.generate()?, portfolio::ReturnKind::Simple)?.0
        }
        (None, None) => bail!("one of --prices, --synthetic or --instance is required"),
    };
    let est = portfolio::estimate(&data)?;
    let lo = if args.budget { est.mu.min() } else { 0.0 };
    let target = args.target.unwrap_or(0.5 * (lo + est.mu.max()));
    let mut prob = PortfolioProblem::new(&est, target);
    if args.budget {
        prob = prob.with_budget();
    }
    let red = portfolio::to_socp(&prob)?;
    for w in &red.warnings {
        log::warn!("{w}");
    }
    let report = run_instance(&red.instance, &config, &args.common, args.adaptive)?;
    let solution = if report.converged() {
        Some(portfolio::extract_solution(&prob, &red.map, &report.x, config.epsilon)?)
    } else {
        None
    };
    eprintln!(
        "{:?} after {} iterations, risk {:.6e}",
        report.status, report.iterations, report.objective
    );
    let doc = serde_json::json!({ "solution": solution, "report": report });
    write_or_print(args.common.out.as_deref(), &serde_json::to_string_pretty(&doc)?)?;
    Ok(if report.converged() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn suite(args: SuiteArgs) -> anyhow::Result<ExitCode> {
    let text = fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let mut spec: ExperimentSpec = serde_json::from_str(&text).context("parsing experiment spec")?;
    let c = &args.common;
    if let Some(e) = c.epsilon {
        spec.epsilon = e;
    }
    if let Some(ch) = c.chi {
        spec.chi = ch;
    }
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    if let Some(d) = c.delta {
        spec.noise.delta = d;
        if d == 0.0 {
            spec.noise.mode = NoiseMode::Fixed;
        }
    }
    let report = experiment::run_suite(&spec)?;
    let summary = plots::summarize(&report.rows);
    if let Some(dir) = &c.out {
        plots::emit_plots(&report.rows, &report.traces, dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    let failures = report.failures();
    if failures > 0 {
        eprintln!("{failures} of {} trials failed", report.rows.len());
        return Ok(ExitCode::from(PARTIAL_FAILURE));
    }
    Ok(ExitCode::SUCCESS)
}

fn fit(args: FitArgs) -> anyhow::Result<ExitCode> {
    let mut reader = csv::Reader::from_path(&args.points).with_context(|| format!("reading {}", args.points.display()))?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |k: usize| -> anyhow::Result<f64> {
            let cell = record.get(k).with_context(|| format!("row {}: missing column {}", i + 1, k + 1))?;
            cell.trim().parse().with_context(|| format!("row {}: bad number {cell:?}", i + 1))
        };
        points.push((parse(0)?, parse(1)?));
    }
    let points = powerlaw::trim_largest(&points, args.trim);
    let fit = powerlaw::fit_power_law(&points)?;
    write_or_print(args.out.as_deref(), &serde_json::to_string_pretty(&fit)?)?;
    Ok(ExitCode::SUCCESS)
}

fn generate(args: GenerateArgs) -> anyhow::Result<ExitCode> {
    let market = SyntheticMarket { assets: args.assets, days: args.days, seed: args.seed, ..Default::default() };
    market.generate()?.write_csv(&args.out)?;
    Ok(ExitCode::SUCCESS)
}
