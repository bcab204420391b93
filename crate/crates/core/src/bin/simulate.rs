use clap::Parser;
use ringsqz::config::{RunConfig, ScenarioName};
use ringsqz::exec::init_threads;
use ringsqz::runner::{run_check, run_scenario, Summary};
use ringsqz::Error;
use std::path::PathBuf;
use std::process::ExitCode;

/// Squeezed light from a lossy microring: runs a named scenario and writes CSVs.
#[derive(Parser, Debug)]
#[command(name = "simulate", version)]
struct Args {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Scenario to run; defaults to `scenario.name` in the config.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory; defaults to `output.dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides RINGSQZ_THREADS).
    #[arg(long, env = "RINGSQZ_THREADS")]
    threads: Option<usize>,
    /// Run the oracle suite instead of a scenario.
    #[arg(long)]
    check: bool,
}

const EXIT_CRASH: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::Domain(_) | Error::InfeasibleTarget(_) | Error::Unphysical(_) => {
            EXIT_CONFIG
        }
        Error::NotConverged(_) | Error::StepSize(_) => EXIT_NOT_CONVERGED,
        _ => EXIT_CRASH,
    }
}

fn run(args: &Args) -> Result<(Summary, bool), Error> {
    let cfg = RunConfig::load(&args.config)?;
    cfg.validate()?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    if args.check {
        return Ok((run_check(&cfg, &out)?, true));
    }
    let name = match &args.scenario {
        Some(s) => ScenarioName::parse(s)?,
        None => cfg.scenario.name,
    };
    Ok((run_scenario(&cfg, name, &out)?, false))
}

fn main() -> ExitCode {
    let args = Args::parse();
    init_threads(args.threads);
    match run(&args) {
        Ok((s, check)) => {
            eprintln!(
                "{} points, {} not converged, {} oracle failures in {:.1} s -> {}",
                s.points,
                s.not_converged,
                s.oracle_failures,
                s.seconds,
                s.out_dir.display()
            );
            if s.not_converged > 0 {
                ExitCode::from(EXIT_NOT_CONVERGED)
            } else if check && s.oracle_failures > 0 {
                ExitCode::from(EXIT_CHECK_FAILED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
