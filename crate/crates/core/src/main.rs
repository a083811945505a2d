use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use replica_risk::cli::{
    cmd_experiment, cmd_predict, cmd_solve, default_portfolio_path, parse_config,
};
use replica_risk::{ExperimentOptions, MomentsMode, Verdict};

#[derive(Parser)]
#[command(
    version,
    about = "Cost- and return-constrained risk minimization: replica theory vs. exact solves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat `key = value` scenario file.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Replaces the config's master_seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Moments::Empirical)]
    moments: Moments,
}

#[derive(Clone, Copy, ValueEnum)]
enum Moments {
    Empirical,
    Analytic,
}

impl From<Moments> for MomentsMode {
    fn from(m: Moments) -> Self {
        match m {
            Moments::Empirical => MomentsMode::Empirical,
            Moments::Analytic => MomentsMode::Analytic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form predictions along the return grid.
    Predict {
        #[command(flatten)]
        common: Common,
    },
    /// One draw, exact optimum at every grid point.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Portfolio output; defaults to `<out>` with a `.portfolio.csv` extension.
        #[arg(long)]
        portfolio: Option<PathBuf>,
    },
    /// Monte Carlo comparison of exact solves with the predictions.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Exit 0 even if the verdict is "inconsistent".
        #[arg(long)]
        no_verdict_gate: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn run(cli: Cli) -> replica_risk::Result<ExitCode> {
    let load = |c: &Common| -> replica_risk::Result<_> {
        let mut cfg = parse_config(&c.config)?;
        if let Some(seed) = c.seed {
            cfg.master_seed = seed;
        }
        Ok((cfg, BufWriter::new(File::create(&c.out)?)))
    };
    match cli.command {
        Command::Predict { common } => {
            let (cfg, mut out) = load(&common)?;
            cmd_predict(&cfg, common.moments.into(), &mut out)?;
            out.flush()?;
        }
        Command::Solve { common, portfolio } => {
            let (cfg, mut out) = load(&common)?;
            let path = portfolio.unwrap_or_else(|| default_portfolio_path(&common.out));
            let mut pf = BufWriter::new(File::create(path)?);
            cmd_solve(&cfg, &mut out, &mut pf)?;
            out.flush()?;
            pf.flush()?;
        }
        Command::Experiment {
            common,
            no_verdict_gate,
            threads,
        } => {
            let (cfg, mut out) = load(&common)?;
            let opts = ExperimentOptions {
                threads,
                moments_mode: common.moments.into(),
            };
            let verdict = cmd_experiment(&cfg, opts, &mut out)?;
            out.flush()?;
            if verdict == Verdict::Inconsistent && !no_verdict_gate {
                eprintln!("verdict: inconsistent");
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
