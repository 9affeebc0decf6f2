use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::Run;
use output::{CommandRecord, Manifest, Writer};

#[derive(Parser)]
#[command(
    name = "diracloc",
    version,
    about = "Localization experiments for planar Dirac operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probe the field profile and classify its asymptotic regime.
    Verify(Common),
    /// Eigenvalues per channel and the count bound.
    Spectrum(Common),
    /// Windowed time evolution of a wave packet and its moments.
    Localize(Common),
    /// Weighted decay of eigenfunctions beyond the turning radius.
    Agmon(Common),
    /// Quick numerical checks and manifest cross-reference.
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "DIRACLOC_JOBS")]
    jobs: Option<usize>,
    /// `dotted.key=value` replacement, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn execute(name: &str, common: &Common) -> Result<u8> {
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()?;
    }
    let mut cfg = config::load_config(common.config.as_deref(), &common.overrides)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    let hash = cfg.hash();
    let mut out = Writer::new(&cfg.out_dir, &hash)?;
    let mut warnings = Vec::new();
    let start = Instant::now();
    let run = Run {
        cfg: &cfg,
        out: &mut out,
        warnings: &mut warnings,
    };
    let code = match name {
        "verify" => commands::verify(run),
        "spectrum" => commands::spectrum(run),
        "localize" => commands::localize(run),
        "agmon" => commands::agmon(run),
        _ => commands::selftest(run),
    }?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if name != "selftest" {
        Manifest::record(
            &cfg.out_dir,
            &hash,
            CommandRecord {
                command: name.to_string(),
                outputs: out.outputs,
                wall_seconds: start.elapsed().as_secs_f64(),
                warnings,
            },
        )?;
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Verify(c) => ("verify", c),
        Command::Spectrum(c) => ("spectrum", c),
        Command::Localize(c) => ("localize", c),
        Command::Agmon(c) => ("agmon", c),
        Command::Selftest(c) => ("selftest", c),
    };
    match execute(name, common) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
