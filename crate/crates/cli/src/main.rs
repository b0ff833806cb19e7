//! `recon`: batch pipeline for desk-scale CT/MRI reconstruction with
//! patch-based learned priors.
//!
//! Every subcommand takes one flat config file plus `--set key=value`
//! overrides, and exchanges arrays through NDF files. Exit codes:
//! 0 success, 1 usage or configuration error, 2 numerical failure.

mod commands;
mod config;
mod pgm;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use recon_core::CoreError;

use config::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "recon",
    about = "Three-stage image reconstruction: direct recon, patch prior, Tikhonov data consistency"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// flat `key = value` configuration file
    #[arg(long)]
    config: PathBuf,
    /// override one configuration key (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// print the effective configuration (file + overrides) to stdout
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth phantom (and coil maps in MRI mode)
    Phantom(CommonArgs),
    /// Simulate measurements from a phantom
    Simulate(CommonArgs),
    /// Train the convolutional denoiser or the dictionary
    Train(CommonArgs),
    /// Apply the configured prior to an initial reconstruction
    Prior(CommonArgs),
    /// Run the full three-stage reconstruction
    Reconstruct(CommonArgs),
    /// Compute PSNR/NRMSE/SSIM/HPSI against a reference
    Evaluate(CommonArgs),
    /// Window a slice into an 8-bit PGM image
    Render(CommonArgs),
    /// Run the Tikhonov convergence noise sweep
    Convergence(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Phantom(a)
            | Command::Simulate(a)
            | Command::Train(a)
            | Command::Prior(a)
            | Command::Reconstruct(a)
            | Command::Evaluate(a)
            | Command::Render(a)
            | Command::Convergence(a) => a,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let args = cli.command.args();
    let mut cfg = PipelineConfig::load(&args.config)?;
    cfg.apply_overrides(&args.set)?;
    if args.print_config {
        print!("{}", cfg.dump());
    }
    match cli.command {
        Command::Phantom(_) => commands::cmd_phantom(&cfg),
        Command::Simulate(_) => commands::cmd_simulate(&cfg),
        Command::Train(_) => commands::cmd_train(&cfg),
        Command::Prior(_) => commands::cmd_prior(&cfg),
        Command::Reconstruct(_) => commands::cmd_reconstruct(&cfg),
        Command::Evaluate(_) => commands::cmd_evaluate(&cfg),
        Command::Render(_) => commands::cmd_render(&cfg),
        Command::Convergence(_) => commands::cmd_convergence(&cfg),
    }
}

/// Numerical failures exit with 2, everything else with 1.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            match core {
                CoreError::Numerical(_) | CoreError::Domain(_) => return 2,
                _ => {}
            }
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successes; anything else is a usage error
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
