use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use onebit::experiment::{
    cmd_compare_peaks, cmd_optimize, cmd_simulate, cmd_sweep, ConfigError, ExperimentConfig, RunError,
    StrategyName, DEFAULT_RANDOM_DRAWS,
};

/// Threshold optimization and simulation for one-bit feedback scheduling.
#[derive(Parser)]
#[command(name = "onebit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize thresholds at every sweep point and write thresholds.csv.
    Optimize(Common),
    /// Simulate the scheduler and write simulation.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Thresholds table from a previous `optimize` run (rows match sweep points).
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
    /// Compare brute-force, random and heuristic region choice; writes peaks.csv.
    ComparePeaks {
        #[command(flatten)]
        common: Common,
        /// Random draws behind the worst-case loss column.
        #[arg(long, default_value_t = DEFAULT_RANDOM_DRAWS)]
        draws: u64,
    },
    /// Optimize, then simulate at the optimized thresholds.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; the built-in five-user sweep is used without it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated blocks per sweep point.
    #[arg(long)]
    blocks: Option<u64>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Brute,
    Random,
    Heuristic,
}

impl From<StrategyArg> for StrategyName {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Brute => StrategyName::Brute,
            StrategyArg::Random => StrategyName::Random,
            StrategyArg::Heuristic => StrategyName::Heuristic,
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| ConfigError {
                line: None,
                message: format!("cannot read {}: {e}", path.display()),
            })?;
            ExperimentConfig::parse(&text).map_err(|e| ConfigError {
                message: format!("{}: {}", path.display(), e.message),
                ..e
            })?
        }
        None => ExperimentConfig::default_experiment(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(b) = common.blocks {
        if b == 0 {
            return Err(ConfigError {
                line: None,
                message: "--blocks must be positive".into(),
            }
            .into());
        }
        cfg.n_blocks = b;
    }
    if let Some(s) = common.strategy {
        cfg.strategy = s.into();
    }
    Ok(cfg)
}

fn init_threads() -> Result<(), RunError> {
    let Ok(v) = std::env::var("ONEBIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| ConfigError {
        line: None,
        message: format!("ONEBIT_THREADS must be a positive integer, got {v:?}"),
    })?;
    // Fails only if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn announce(out: &Path) {
    info!("outputs written to {}", out.display());
}

fn run(cli: Cli) -> Result<(), RunError> {
    init_threads()?;
    match cli.command {
        Command::Optimize(c) => {
            let cfg = load(&c)?;
            let (_, summary) = cmd_optimize(&cfg, &c.out)?;
            print!("{summary}");
            announce(&c.out);
        }
        Command::Simulate { common, thresholds } => {
            let cfg = load(&common)?;
            let rows = cmd_simulate(&cfg, thresholds.as_deref(), &common.out)?;
            for r in rows {
                println!(
                    "phi analytic {:.6}  one-bit {:.6} ± {:.6}  full CSI {:.6}",
                    r.phi_analytic, r.report.one_bit.mean, r.report.one_bit.std_error, r.report.full_csi.mean
                );
            }
            announce(&common.out);
        }
        Command::ComparePeaks { common, draws } => {
            let cfg = load(&common)?;
            for r in cmd_compare_peaks(&cfg, draws, &common.out)? {
                println!(
                    "best {:.6}  random loss {:.3}%  heuristic loss {:.3}%  worst random loss {:.3}%",
                    r.phi_bruteforce,
                    r.loss_random_percent(),
                    r.loss_heuristic_percent(),
                    r.loss_random_worst_percent()
                );
            }
            announce(&common.out);
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            let (_, sim) = cmd_sweep(&cfg, &c.out)?;
            println!("{} sweep points written to {}", sim.len(), c.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
