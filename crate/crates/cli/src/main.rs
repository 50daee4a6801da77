use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nhp_cli::catalog::{catalog_json, catalog_text, list_catalog};
use nhp_cli::config::{parse_config, Check, ScenarioConfig};
use nhp_cli::corpus::run_corpus;
use nhp_cli::run::{run_scenario, CliError, RunOptions, ScenarioReport};

#[derive(Parser)]
#[command(name = "nhp", version, about = "Simulate filters and PI loops and check their dissipation certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the scenario's `output_dir`, then `out/<stem>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pointwise tolerance, overriding the scenario.
    #[arg(long)]
    tol_pw: Option<f64>,
    /// Integral tolerance, overriding the scenario.
    #[arg(long)]
    tol_int: Option<f64>,
    /// Worker threads for batteries and fits.
    #[arg(long)]
    workers: Option<usize>,
    /// Format of the summary printed to stdout.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// List catalog systems, their parameters and certificates.
    List {
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Simulate and write trajectory.csv only.
    Simulate(Common),
    /// Pointwise, integral and trajectory checks.
    Verify(Common),
    /// Gain fitting and the robust gain check.
    Gain(Common),
    /// Series composition report (needs `[downstream]`).
    Compose(Common),
    /// Grid inequality checks: fenchel, sector or psi, whichever applies.
    Ineq(Common),
    /// Every check the scenario lists.
    Run(Common),
    /// Run every scenario in a directory and compare with `expect_exit`.
    Corpus {
        /// Directory of `*.toml` scenarios.
        dir: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn load(common: &Common) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(&common.config).map_err(|source| CliError::Io {
        path: common.config.clone(),
        source,
    })?;
    let mut cfg = parse_config(&text).map_err(CliError::Config)?;
    if let Some(t) = common.tol_pw {
        cfg.tolerances.pointwise = Some(t);
    }
    if let Some(t) = common.tol_int {
        cfg.tolerances.integral = Some(t);
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ScenarioConfig) -> PathBuf {
    if let Some(o) = &common.out {
        return o.clone();
    }
    if let Some(o) = &cfg.output_dir {
        return o.clone();
    }
    let stem = common.config.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
    Path::new("out").join(stem)
}

fn print_report(report: &ScenarioReport, format: Format) {
    match format {
        Format::Json => print!("{}", report.to_json()),
        Format::Csv => print!("{}", report.to_csv()),
        Format::Text => {
            for line in report.summary_lines() {
                println!("{line}");
            }
            println!("{} (exit {})", report.status.as_str(), report.exit_code);
        }
    }
}

fn scenario(common: &Common, only: Option<&[Check]>, fallback: &[Check], always_simulate: bool) -> Result<i32, CliError> {
    let cfg = load(common)?;
    let mut opts = RunOptions::new(out_dir(common, &cfg));
    opts.only = only.map(<[Check]>::to_vec);
    opts.fallback = fallback.iter().copied().filter(|c| c.applies_to(&cfg.system)).collect();
    opts.always_simulate = always_simulate;
    if let Some(w) = common.workers {
        opts.workers = w.max(1);
    }
    let report = run_scenario(&cfg, &opts)?;
    print_report(&report, common.format);
    Ok(report.exit_code)
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    use Check::*;
    match cli.command {
        Command::List { format } => {
            let entries = list_catalog();
            match format {
                Format::Json => print!("{}", catalog_json(&entries)),
                _ => print!("{}", catalog_text(&entries)),
            }
            Ok(0)
        }
        Command::Simulate(c) => scenario(&c, Some(&[]), &[], true),
        Command::Verify(c) => {
            let only = [Pointwise, Integral, Wfgs, Barbalat];
            scenario(&c, Some(&only), &[Pointwise, Integral], false)
        }
        Command::Gain(c) => scenario(&c, Some(&[FitGain, RobustGain]), &[FitGain, RobustGain], false),
        Command::Compose(c) => scenario(&c, Some(&[Compose]), &[Compose], false),
        Command::Ineq(c) => scenario(&c, Some(&[Fenchel, Sector, Psi]), &[Fenchel, Sector, Psi], false),
        Command::Run(c) => scenario(&c, None, &[], false),
        Command::Corpus { dir, out, workers } => {
            let workers = workers.unwrap_or_else(nhp_core::default_workers).max(1);
            let entries = run_corpus(&dir, &out, workers)?;
            let mut mismatches = 0;
            for e in &entries {
                let mark = if e.as_expected() { "ok" } else { "MISMATCH" };
                let expected = e.expected.unwrap_or(0);
                println!("{mark} {} exit {} expected {expected}: {}", e.name, e.exit_code, e.message);
                if !e.as_expected() {
                    mismatches += 1;
                }
            }
            println!("{} scenarios, {mismatches} mismatched", entries.len());
            Ok(if mismatches == 0 { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
