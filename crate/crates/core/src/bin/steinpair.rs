//! Experiment runner CLI: `steinpair normal|poisson|verify`.
//!
//! Exit codes: 0 when every theorem assertion holds, 1 when a run completes
//! but an assertion fails (a bound not dominating, an identity residual out
//! of tolerance), 2 for configuration or parameter errors. Errors are
//! printed to stderr as a machine-readable JSON object.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use steinpair::pipeline::{
    run_normal, run_poisson, run_verify, verify_summary_table, ConfigDocument, ExperimentConfig,
    Mode, RunOutcome,
};
use steinpair::{Error, Result};

#[derive(Parser)]
#[command(
    name = "steinpair",
    version,
    about = "Exact pair couplings and numerically certified Stein's-method bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normal-approximation pipeline: bounds, exact Kolmogorov distance, and
    /// the equal-marginals identity suite for one model
    Normal(RunArgs),
    /// Poisson-approximation pipeline: kappa/rho suprema, total-variation
    /// distance, and the total bound for one model
    Poisson(RunArgs),
    /// Certification suite across the built-in model matrix
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Model name: rademacher | immigration_death | skewed_two_step |
    /// fixed_points | biased_cycle
    #[arg(long)]
    model: Option<String>,

    /// Model or pipeline parameter as key=value (repeatable), e.g. -p n=16
    #[arg(long = "param", short = 'p', value_name = "KEY=VALUE")]
    params: Vec<String>,

    /// JSON config file mirroring the experiment configuration; command-line
    /// flags override file entries
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for report.json and rows.csv; without it the report
    /// goes to stdout
    #[arg(long)]
    out: Option<PathBuf>,

    /// Which artifacts to write: json, csv, or both
    #[arg(long, default_value = "both")]
    format: String,

    /// Seed recorded in the report; drives the randomized certification
    /// subsets in verify mode
    #[arg(long)]
    seed: Option<u64>,
}

struct Resolved {
    config: ExperimentConfig,
    out: Option<PathBuf>,
    format: String,
}

fn resolve(mode: Mode, args: &RunArgs) -> Result<Resolved> {
    let file: ConfigDocument = match &args.config {
        Some(path) => ConfigDocument::parse(&std::fs::read_to_string(path)?)?,
        None => ConfigDocument::default(),
    };
    let mut config = ExperimentConfig::from_document(mode, &file);
    if let Some(model) = &args.model {
        config.model = Some(model.clone());
    }
    for pair in &args.params {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--param expects key=value, got `{pair}`")))?;
        let parsed: f64 = value
            .parse()
            .map_err(|_| Error::Config(format!("--param {key}: `{value}` is not a number")))?;
        config.params.insert(key.to_string(), parsed);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let format = match (&args.format[..], file.format) {
        ("both", Some(from_file)) => from_file,
        _ => args.format.clone(),
    };
    if !["json", "csv", "both"].contains(&format.as_str()) {
        return Err(Error::Config(format!("unknown format `{format}`")));
    }
    Ok(Resolved {
        config,
        out: args.out.clone().or(file.out.map(PathBuf::from)),
        format,
    })
}

fn emit(outcome: &RunOutcome, resolved: &Resolved) -> Result<()> {
    let report = outcome.report_string()?;
    match &resolved.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            if resolved.format != "csv" {
                std::fs::write(dir.join("report.json"), &report)?;
            }
            if resolved.format != "json" {
                std::fs::write(dir.join("rows.csv"), outcome.csv_string())?;
            }
            if let Some(coupling) = &outcome.coupling_json {
                std::fs::write(dir.join("coupling.json"), coupling)?;
            }
            eprintln!(
                "wrote {} ({})",
                dir.display(),
                if outcome.all_pass {
                    "all checks pass"
                } else {
                    "CHECK FAILURES"
                }
            );
        }
        None => {
            if resolved.format == "csv" {
                print!("{}", outcome.csv_string());
            } else {
                print!("{report}");
            }
        }
    }
    Ok(())
}

fn run(mode: Mode, args: &RunArgs) -> Result<bool> {
    let resolved = resolve(mode, args)?;
    let outcome = match mode {
        Mode::Normal => run_normal(&resolved.config)?,
        Mode::Poisson => run_poisson(&resolved.config)?,
        Mode::Verify => {
            let outcome = run_verify(&resolved.config)?;
            eprint!("{}", verify_summary_table(&outcome));
            outcome
        }
    };
    emit(&outcome, &resolved)?;
    Ok(outcome.all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match &cli.command {
        Command::Normal(args) => (Mode::Normal, args),
        Command::Poisson(args) => (Mode::Poisson, args),
        Command::Verify(args) => (Mode::Verify, args),
    };
    match run(mode, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("steinpair: theorem assertion failed (see report)");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!(
                "{{\"error\": {{\"kind\": \"{}\", \"message\": {}}}}}",
                err.kind(),
                serde_json::to_string(&err.to_string()).unwrap_or_else(|_| "\"\"".into())
            );
            ExitCode::from(2)
        }
    }
}
