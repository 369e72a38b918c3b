//! `cvnn`: command-line front end for the oscillator network library.

mod commands;
mod config;
mod error;
mod raster;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, Section};
use error::CliError;

#[derive(Parser)]
#[command(name = "cvnn", version, about = "Exactly solvable complex-valued oscillator network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file; unspecified fields take their defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Base seed for every random choice in the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted overrides, e.g. `model.phase_delay_rad=0.5`.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Random start, designed chimera, designed release; writes rasters.
    Simulate(Common),
    /// Similarity over a (phase delay, lead time) grid.
    Sweep(Common),
    /// Truth tables of one logic gate, optionally under noise.
    Gate(Common),
    /// Short-term memory schedule of cue, update and erase events.
    Memory(Common),
    /// Leaky integrate-and-fire readout of held memory items.
    Lif(Common),
    /// Chimera-alphabet message protocol.
    Crypto {
        #[command(subcommand)]
        action: CryptoAction,
    },
}

#[derive(Subcommand)]
enum CryptoAction {
    /// Write a secret key file.
    Keygen(Common),
    Encrypt(Common),
    Decrypt(Common),
    /// Replay a ciphertext with a guessed key.
    Eavesdrop(Common),
    /// Replay a ciphertext with many random keys.
    Attack(Common),
}

/// `CVNN_WORKERS` takes precedence over the config file.
fn init_workers(cfg: &RunConfig) -> Result<(), CliError> {
    let workers = match std::env::var("CVNN_WORKERS") {
        Ok(v) => Some(v.trim().parse::<usize>().ok().filter(|&w| w > 0).ok_or_else(|| {
            CliError::Config(vec![format!("CVNN_WORKERS must be a positive integer, got {v:?}")])
        })?),
        Err(_) => cfg.workers,
    };
    if let Some(w) = workers {
        if w == 0 {
            return Err(CliError::Config(vec!["workers must be > 0".into()]));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Config(vec![format!("cannot start {w} workers: {e}")]))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    type Handler = fn(&RunConfig) -> Result<(), CliError>;
    let (common, section, handler): (Common, Section, Handler) = match cli.command {
        Command::Simulate(c) => (c, Section::Simulate, commands::simulate),
        Command::Sweep(c) => (c, Section::Sweep, commands::sweep),
        Command::Gate(c) => (c, Section::Gate, commands::gate),
        Command::Memory(c) => (c, Section::Memory, commands::memory),
        Command::Lif(c) => (c, Section::Lif, commands::lif),
        Command::Crypto { action } => match action {
            CryptoAction::Keygen(c) => (c, Section::Crypto, commands::crypto_keygen),
            CryptoAction::Encrypt(c) => (c, Section::Crypto, commands::crypto_encrypt),
            CryptoAction::Decrypt(c) => (c, Section::Crypto, commands::crypto_decrypt),
            CryptoAction::Eavesdrop(c) => (c, Section::Crypto, commands::crypto_eavesdrop),
            CryptoAction::Attack(c) => (c, Section::Crypto, commands::crypto_attack),
        },
    };
    let cfg = config::load(
        common.config.as_deref(),
        &common.overrides,
        common.seed,
        common.out.as_deref(),
    )?;
    config::validate(&cfg, section)?;
    init_workers(&cfg)?;
    handler(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
