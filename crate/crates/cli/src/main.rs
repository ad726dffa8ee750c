mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rydtwin::engine::Scheme;
use rydtwin::Error;

use config::{Backend, Config, ConfigError};
use output::Output;

#[derive(Parser)]
#[command(name = "rydtwin", version, about = "Compile and simulate GHZ preparation on Rydberg arrays")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `compile.seed` and `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    /// Enable Rydberg decay and leakage.
    #[arg(long, global = true)]
    open: bool,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// `two_state` or `single_state`.
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Permit pulse runs beyond the routine size limit.
    #[arg(long, global = true)]
    allow_large: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a shallow GHZ circuit and write circuit.json.
    Compile,
    /// Lower a logical circuit to native gates.
    Lower {
        #[arg(long)]
        circuit: PathBuf,
    },
    /// Run a circuit and write run.json, series.csv and state.bin.
    Simulate {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Draw measurement shots from a saved state.
    Sample {
        #[arg(long)]
        state: PathBuf,
    },
    /// Per-layer fidelity, Rydberg observables, dephasing and readout labels.
    Analyze {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Compile and simulate across `compile.r_g_sq_list`.
    Sweep,
    /// Optimise the CZ pulse and write device.toml.
    Calibrate,
    /// Full pipeline: compile, simulate, sample and analyze.
    Report,
}

fn apply_overrides(cli: &Cli, cfg: &mut Config) -> Result<(), ConfigError> {
    if let Some(s) = cli.seed {
        cfg.compile.seed = s;
        cfg.sim.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.output.dir = d.clone();
    }
    if let Some(b) = cli.backend {
        cfg.sim.backend = b;
    }
    if cli.open {
        cfg.sim.open_system = true;
    }
    if let Some(dt) = cli.dt {
        cfg.sim.dt_us = dt;
    }
    if let Some(n) = cli.shots {
        cfg.sim.shots = n;
    }
    if let Some(s) = &cli.scheme {
        cfg.sim.scheme = match s.as_str() {
            "two_state" | "two" => Scheme::TwoState,
            "single_state" | "single" => Scheme::SingleState,
            other => return Err(ConfigError(format!("unknown scheme `{other}`"))),
        };
    }
    if cli.allow_large {
        cfg.sim.allow_large = true;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    apply_overrides(&cli, &mut cfg)?;
    let out = Output::new(cfg.output.dir.clone(), cfg.hash())?;
    match &cli.command {
        Command::Compile => commands::cmd_compile(&cfg, &out).map(drop),
        Command::Lower { circuit } => commands::cmd_lower(&cfg, circuit, &out).map(drop),
        Command::Simulate { circuit, profile } => {
            commands::cmd_simulate(&cfg, circuit, profile.as_deref(), &out).map(drop)
        }
        Command::Sample { state } => commands::cmd_sample(&cfg, state, &out).map(drop),
        Command::Analyze { circuit, profile } => commands::cmd_analyze(&cfg, circuit, profile.as_deref(), &out),
        Command::Sweep => commands::cmd_sweep(&cfg, &out).map(drop),
        Command::Calibrate => commands::cmd_calibrate(&cfg, &out).map(drop),
        Command::Report => commands::cmd_report(&cfg, &out),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::InvalidLattice(_)
            | Error::UnsupportedOrder { .. }
            | Error::NonAdjacent(..)
            | Error::InvalidGate(_)
            | Error::InvalidCircuit(_)
            | Error::InvalidRequest(_)
            | Error::InvalidParameter(_)
            | Error::Schema(_)
            | Error::Json(_),
        ) => 2,
        Some(Error::SearchExhausted { .. }) | Some(Error::Infeasible(_)) => 3,
        Some(Error::TooManySites { .. }) | Some(Error::LargeRun { .. }) => 4,
        Some(Error::IntegratorUnstable(_)) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("RYDTWIN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(Error::TooManySites { n, .. }) = e.downcast_ref::<Error>() {
                eprintln!("a dense run on {n} sites would need roughly {:.1} GiB", commands::gib(*n));
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
