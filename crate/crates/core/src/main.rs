use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eidsim::config::{LoadedConfig, Mode};
use eidsim::{run, Error};

#[derive(Parser)]
#[command(
    name = "eidsim",
    version,
    about = "Dark-state molecular beam purification simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Level model size.
    #[arg(long, value_parser = ["3", "7", "9", "11"])]
    model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (overrides `run.output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave the generation timestamp out of SVG files.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Dressed spectrum, dark-state check and potential surfaces.
    Eigen(Common),
    /// Adiabatic following through the laser crossing.
    Follow(Common),
    /// STIRAP transfer and superposition sequences.
    Stirap(Common),
    /// Thermal ensemble through the three-slit beamline.
    Beamline(Common),
    /// Two states split by a small frequency (75 MHz by default).
    Li6demo(Common),
    /// Beamline runs over a parameter grid.
    Sweep(Common),
    /// Parse and cross-check a configuration.
    ValidateConfig(Common),
}

fn load(c: &Common) -> eidsim::Result<LoadedConfig> {
    let mut cfg = match &c.config {
        Some(p) => LoadedConfig::from_path(p)?,
        None => LoadedConfig::defaults(),
    };
    if let Some(m) = &c.model {
        cfg.config.levels.model = m.parse().expect("restricted by clap");
    }
    if let Some(s) = c.seed {
        cfg.config.run.seed = s;
    }
    if c.no_timestamp {
        cfg.config.run.svg_timestamp = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> eidsim::Result<()> {
    let (mode, common) = match cli.command {
        Command::Eigen(c) => (Some(Mode::Eigen), c),
        Command::Follow(c) => (Some(Mode::Follow), c),
        Command::Stirap(c) => (Some(Mode::Stirap), c),
        Command::Beamline(c) => (Some(Mode::Beamline), c),
        Command::Li6demo(c) => (Some(Mode::Li6demo), c),
        Command::Sweep(c) => (Some(Mode::Sweep), c),
        Command::ValidateConfig(c) => (None, c),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let cfg = load(&common)?;
    let text = match mode {
        None => serde_json::to_string_pretty(&run::validate_config(&cfg)),
        Some(mode) => {
            let out = common
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(&cfg.config.run.output_dir));
            serde_json::to_string_pretty(&run::run(mode, &cfg, &out)?)
        }
    };
    // a closed pipe (`| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout(), "{}", text.expect("serializable"));
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eidsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
