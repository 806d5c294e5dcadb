use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use foliated_lefschetz::runner::{
    apply_overrides, bundled_scenario, emit_report, overall_status, report_json, summary_csv, write_atomic,
    ReportDocument, ReportFormat, RunOptions, ScenarioConfig, BUNDLED_SCENARIOS,
};
use foliated_lefschetz::{Error, Result};

const THREADS_VAR: &str = "FOLIATED_LEFSCHETZ_THREADS";

#[derive(Parser, Debug)]
#[command(name = "foliated-lefschetz", version, about = "Leafwise cohomology and Lefschetz checks on flat foliated tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML, or JSON with a .json extension); replaces the bundled scenarios.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for report files; without it the JSON report goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["json", "csv"])]
    format: Option<String>,
    /// Sup-norm bound on lattice modes.
    #[arg(long, global = true)]
    truncation: Option<i64>,
    #[arg(long, global = true)]
    tmax: Option<f64>,
    /// Record wall-clock time per check (reports are then not reproducible byte for byte).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Exterior-calculus laws, harmonic dimensions, Künneth and duality.
    Cohomology,
    /// Flow Lefschetz formula with both sides computed.
    Lefschetz,
    /// Fixed points of toral endomorphisms against alternating traces.
    Classical,
    /// Periodic orbits of a suspension flow.
    Suspension,
    /// Intersection products of subtorus currents.
    Intersect,
    /// Smoothing of forms and currents.
    Regularize,
    /// Every bundled scenario.
    All,
}

impl Command {
    fn scenarios(self) -> Vec<&'static str> {
        match self {
            Command::Cohomology => vec!["exterior_laws", "kronecker_cohomology", "kunneth_kronecker_product", "one_leaf_cohomology"],
            Command::Lefschetz => vec!["morse_one_leaf", "kronecker_translation"],
            Command::Classical => vec!["cat_classical"],
            Command::Suspension => vec!["cat_suspension"],
            Command::Intersect => vec!["intersections"],
            Command::Regularize => vec!["regularization_convergence"],
            Command::All => BUNDLED_SCENARIOS.iter().map(|(n, _)| *n).collect(),
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn load(cli: &Cli) -> Result<Vec<ScenarioConfig>> {
    let mut configs = match &cli.config {
        Some(path) => vec![ScenarioConfig::load(path)?],
        None => cli.command.scenarios().into_iter().map(bundled_scenario).collect::<Result<_>>()?,
    };
    for cfg in &mut configs {
        apply_overrides(cfg, cli.truncation, cli.tmax)?;
    }
    Ok(configs)
}

fn run(cli: &Cli) -> Result<Vec<ReportDocument>> {
    configure_threads()?;
    let configs = load(cli)?;
    let opts = RunOptions { timing: cli.timing };
    let reports = configs
        .par_iter()
        .map(|cfg| foliated_lefschetz::runner::run_scenario(cfg, opts))
        .collect::<Result<Vec<_>>>()?;
    for (cfg, report) in configs.iter().zip(&reports) {
        let dir = cli.out.clone().or_else(|| cfg.output.dir.clone());
        let format = match &cli.format {
            Some(f) => f.parse()?,
            None => cfg.output.format.unwrap_or(ReportFormat::Json),
        };
        match dir {
            Some(dir) => {
                for path in emit_report(report, format, &dir)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            None => print!("{}", report_json(report)?),
        }
        eprintln!("{}: {}", report.scenario, report.status.as_str());
        for c in &report.checks {
            eprintln!("  {:<22} {}", c.check.as_str(), c.status.as_str());
        }
    }
    if let Some(dir) = &cli.out {
        if reports.len() > 1 {
            write_atomic(&dir.join("summary.csv"), summary_csv(&reports).as_bytes())?;
        }
    }
    Ok(reports)
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
    match run(&cli) {
        Ok(reports) => ExitCode::from(overall_status(&reports).exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                _ => 1,
            })
        }
    }
}
