use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qpo_cli::commands;
use qpo_cli::output::{json_bytes, write_atomic};
use qpo_cli::{CliError, RunConfig};

/// Moments and density matrix of a driven quantum parametric oscillator.
#[derive(Parser)]
#[command(name = "qpo", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a configuration and write moments, summary and dumps.
    Simulate {
        config: PathBuf,
        /// Also write φ₁, φ₂ and the per-snapshot x-solutions.
        #[arg(long)]
        dump_fundamentals: bool,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle checks; nonzero exit on any failure.
    Validate {
        /// All acceptance criteria instead of the fast corners.
        #[arg(long)]
        full: bool,
        /// Base step count for the grid-dependent criteria.
        #[arg(long, requires = "full")]
        steps: Option<usize>,
        /// Use the printed ⟨q²⟩ combination instead of the Schur complement.
        #[arg(long, requires = "full")]
        printed_qq: bool,
        /// Write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Dump γ(s), ζₙ(s), gₙ(s), fₙ(s) and the noise kernels as CSV.
    Kernels {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the static equilibrium moments as JSON.
    Equilibrium { config: PathBuf },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QPO_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::Config(format!("QPO_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(format!("QPO_THREADS: {e}")))
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.cmd {
        Cmd::Simulate { config, dump_fundamentals, out } => {
            let cfg = RunConfig::load(&config)?;
            for w in &cfg.warnings {
                eprintln!("warning: {w}");
            }
            print_paths(&commands::simulate(&cfg, dump_fundamentals, out.as_deref())?);
        }
        Cmd::Validate { full, steps, printed_qq, json } => {
            let reports = commands::validate(full, steps, printed_qq);
            for r in &reports {
                println!("{}", r.line());
            }
            if let Some(path) = json {
                write_atomic(&path, &json_bytes(&commands::reports_json(&reports)))?;
            }
            let failed = reports.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(CliError::Validation(failed));
            }
        }
        Cmd::Kernels { config, out } => {
            let cfg = RunConfig::load(&config)?;
            print_paths(&commands::kernels(&cfg, out.as_deref())?);
        }
        Cmd::Equilibrium { config } => {
            let cfg = RunConfig::load(&config)?;
            let v = commands::equilibrium(&cfg)?;
            print!("{}", String::from_utf8_lossy(&json_bytes(&v)));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qpo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
