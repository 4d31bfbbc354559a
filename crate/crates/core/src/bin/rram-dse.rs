use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rram_dse::cli::{self, CliError, CostRequest, RunConfig};

/// Crossbar mapping cost, simulation and design-space exploration.
#[derive(Parser)]
#[command(name = "rram-dse", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the fixture network and write it with its datasets and sample configs.
    Fixture {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Existing directory to write into.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate RD, tiles and RWO per layer.
    Cost {
        #[arg(long)]
        config: Option<PathBuf>,
        /// A network file, instead of the networks of --config.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        tile_size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the single configuration of a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the grid of a config file and write results, ranking and contours.
    Dse {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild ranking and contour outputs from a results.csv.
    Report {
        /// results.csv, or a directory containing it.
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_svg: bool,
    },
}

fn load(
    config: &Path,
    seed: Option<u64>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    if out.is_some() {
        cfg.out = out;
    }
    let dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| config.parent().unwrap_or(Path::new(".")).to_path_buf());
    Ok((cfg, dir))
}

fn run(args: Args) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    match args.command {
        Command::Fixture { seed, out } => cli::cmd_fixture(seed, &out, &mut stdout).map(drop),
        Command::Cost {
            config,
            network,
            scheme,
            tile_size,
            seed,
            out,
        } => {
            let config = config.map(RunConfig::load).transpose()?;
            let req = CostRequest {
                network,
                config,
                scheme,
                tile_size,
                out,
                seed,
            };
            cli::cmd_cost(&req, &mut stdout).map(drop)
        }
        Command::Simulate {
            config,
            seed,
            jobs,
            out,
        } => {
            let (cfg, dir) = load(&config, seed, jobs, out)?;
            cli::cmd_simulate(&cfg, &dir, &mut stdout).map(drop)
        }
        Command::Dse {
            config,
            seed,
            jobs,
            out,
        } => {
            let (cfg, dir) = load(&config, seed, jobs, out)?;
            cli::cmd_dse(&cfg, &dir, &mut stdout).map(drop)
        }
        Command::Report {
            results,
            out,
            no_svg,
        } => {
            let csv = if results.is_dir() {
                results.join("results.csv")
            } else {
                results
            };
            let dir = out.unwrap_or_else(|| csv.parent().unwrap_or(Path::new(".")).to_path_buf());
            cli::cmd_report(&csv, &dir, !no_svg, &mut stdout).map(drop)
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
