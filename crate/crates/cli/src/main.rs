use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use vw_cli::config::RunConfig;
use vw_cli::output::{RunManifest, Status};
use vw_cli::CliError;

#[derive(Parser)]
#[command(name = "vwlab", version, about = "Numerical experiments for the large-r vortex equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Config file of `key = value` lines; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment once.
    Run(Common),
    /// Run the experiment for every value of `sweep_key`.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the full suite with default parameters and print every check.
    Verify {
        #[arg(long, default_value = "vwlab-verify")]
        out: PathBuf,
    },
    /// Print the accepted config keys with their defaults.
    Keys,
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|source| CliError::IoFailure { path: path.clone(), source })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(dir) = &c.out {
        cfg.set_output_dir(dir.clone());
    }
    if let Some(seed) = c.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn report(m: &RunManifest) -> ExitCode {
    for c in &m.checks {
        println!("{:<12} {}: {}", c.status.label(), c.name, c.detail);
    }
    let failed = m.checks.iter().filter(|c| c.status == Status::Fail).count();
    let known = m.checks.iter().filter(|c| c.status == Status::KnownFail).count();
    println!("{} checks, {failed} failed, {known} known failures", m.checks.len());
    if m.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => load(&c).and_then(|cfg| vw_cli::run(&cfg)),
        Command::Sweep { common, jobs } => load(&common).and_then(|cfg| vw_cli::sweep(&cfg, jobs)),
        Command::Verify { out } => vw_cli::verify(out),
        Command::Keys => {
            for k in vw_cli::config::schema() {
                println!("{:<14} {:<24} {}", k.key, k.default.to_string(), k.doc);
            }
            return ExitCode::SUCCESS;
        }
    };
    match result {
        Ok(m) => report(&m),
        Err(e @ CliError::PartialFailure { .. }) => {
            eprintln!("vwlab: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("vwlab: {e}");
            ExitCode::from(2)
        }
    }
}
