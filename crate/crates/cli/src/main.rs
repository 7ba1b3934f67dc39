//! Command line front end.
//!
//! `spinchain <subcommand>` reads one TOML config (all keys optional),
//! resolves it into a manifest, runs the requested computation, and writes
//! a CSV data product with a sibling manifest that reproduces the run.

mod csvio;
mod expr;
mod run;
mod settings;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "spinchain",
    version,
    about = "Spin-squeezing dynamics of a driven open spin chain",
    long_about = "Simulates an open-boundary spin-1/2 chain whose uniform exchange hosts \
                  collective squeezing when driven by a position-dependent spin flip. \
                  Subcommands emit CSV data products; every product carries a manifest \
                  that reruns it bit-identically."
)]
struct Cli {
    /// TOML config; omitted keys take documented defaults
    #[arg(long, value_name = "PATH", global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides [output].directory
    #[arg(long, value_name = "DIR", global = true)]
    out: Option<PathBuf>,

    /// Worker threads for scans; defaults to the logical core count
    #[arg(long, value_name = "K", global = true)]
    threads: Option<usize>,

    /// Reserved; runs are fully deterministic in this version
    #[arg(long, value_name = "SEED", global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dense many-body spectrum (capped at 12 sites)
    Spectrum,
    /// Magnon dispersion and drive-coupling amplitudes of the open chain
    Spinwaves,
    /// Effective ladder parameters at the configured phase, or over [scan]
    EffectiveParams,
    /// Squeezing trace: xi^2, mean spin, and minimal variance over time
    Evolve,
    /// Effective ladder parameters across a phase grid
    ScanPhi,
    /// Minimum-squeezing search, optionally streamed across a phase grid
    BestSqueezing {
        /// Continue an interrupted scan from its last committed row
        #[arg(long)]
        resume: bool,
    },
    /// Self-check: analytic identities against exact constructions
    Validate {
        /// Comma-separated site counts, each even and at most 12
        #[arg(long, value_name = "LIST", default_value = "4,6,8")]
        sizes: String,
    },
}

fn dispatch(cli: &Cli) -> run::CliResult<()> {
    let inv = run::prepare(cli.config.as_deref(), cli.out.as_deref())?;
    match &cli.command {
        Command::Spectrum => run::spectrum(&inv),
        Command::Spinwaves => run::spinwaves(&inv),
        Command::EffectiveParams => run::effective_params_cmd(&inv),
        Command::Evolve => run::evolve(&inv),
        Command::ScanPhi => run::scan_phi(&inv),
        Command::BestSqueezing { resume } => run::best_squeezing(&inv, *resume),
        Command::Validate { sizes } => run::validate(&inv, sizes),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if k > 0 {
            // A second global-pool initialization is harmless; the first wins.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    }
    if cli.seed.is_some() {
        eprintln!("note: --seed is reserved; this version has no stochastic component");
    }
    let code = match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {:#}", e.inner());
            e.exit_code()
        }
    };
    std::process::exit(code);
}
