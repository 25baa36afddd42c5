use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use stochabs_cli::config::ComputeSet;
use stochabs_cli::run::stats_report;
use stochabs_cli::{parse_config_file, run_audit, run_simulate, run_synth, run_volume, CliError, ProblemConfig};

/// Almost-sure Büchi controller synthesis on grid abstractions.
#[derive(Parser, Debug)]
#[command(name = "stochabs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Problem configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Directory for output files (created if missing).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the abstraction and solve the fixed points.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Start the under-approximation from the full set.
        #[arg(long)]
        no_warm_start: bool,
        /// Comma list of under, over, both, worst-case, losing, all.
        #[arg(long, value_parser = parse_compute)]
        compute: Option<ComputeSet>,
    },
    /// Simulate the refined controller from states in a region.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controller: PathBuf,
        #[arg(long)]
        region: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Print cell counts and volumes of region files.
    Volume {
        #[arg(long = "region", required = true)]
        regions: Vec<PathBuf>,
    },
    /// Audit the under-approximating relation by sampling cell closures.
    #[command(name = "audit-fu")]
    AuditFu {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        /// Number of (cell, input) pairs to audit, or `all`.
        #[arg(long)]
        pairs: Option<String>,
    },
}

fn parse_compute(s: &str) -> Result<ComputeSet, String> {
    ComputeSet::parse(s)
}

fn load(common: &Common) -> Result<ProblemConfig, CliError> {
    let mut cfg = parse_config_file(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth {
            common,
            no_warm_start,
            compute,
        } => {
            let mut cfg = load(&common)?;
            if no_warm_start {
                cfg.warm_start = false;
            }
            if let Some(c) = compute {
                cfg.compute = c;
            }
            let outcome = run_synth(&cfg, common.out_dir.as_deref())?;
            print!("{}", outcome.report);
        }
        Command::Simulate {
            common,
            controller,
            region,
            trials,
            horizon,
        } => {
            let mut cfg = load(&common)?;
            if let Some(t) = trials {
                cfg.sim.trials = t;
            }
            if let Some(h) = horizon {
                cfg.sim.horizon = h;
            }
            let stats = run_simulate(&cfg, &controller, &region, common.out_dir.as_deref())?;
            print!("{}", stats_report(&stats));
        }
        Command::Volume { regions } => print!("{}", run_volume(&regions)?),
        Command::AuditFu { common, samples, pairs } => {
            let mut cfg = load(&common)?;
            if let Some(s) = samples {
                cfg.audit.samples = s;
            }
            match pairs.as_deref() {
                None => {}
                Some("all") => cfg.audit.pairs = None,
                Some(p) => {
                    cfg.audit.pairs = Some(
                        p.parse()
                            .map_err(|_| CliError::Usage(format!("--pairs: bad count '{p}'")))?,
                    )
                }
            }
            let (_, report) = run_audit(&cfg, cfg.sim.seed, common.out_dir.as_deref())?;
            print!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
