use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vflow::commands::{resolve_potential, DEFAULT_EPS_LIST};
use vflow::{cmd_certify, cmd_convergence, cmd_prox_table, cmd_simulate, CliError, EXIT_OK, EXIT_PARSE};

#[derive(Parser)]
#[command(name = "vflow", version, about = "Two-phase compressible flow on the torus: simulate and certify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its snapshot series.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a stored series against the weak solution clauses.
    Certify {
        /// manifest.toml or the directory holding it
        manifest: PathBuf,
        #[arg(long, default_value_t = 50)]
        tests: usize,
        /// Defaults to the seed in the series' scenario.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Residuals under grid and time step refinement, with fitted orders.
    Convergence {
        scenario: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Potential, Moreau envelope and stress along sample directions.
    ProxTable {
        /// Scenario file, or an inline table like '{ kind = "quadratic", mu = 1.0 }'
        source: String,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EPS_LIST.to_vec())]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        phase: u8,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 2.0)]
        max: f64,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn threads() -> Result<(), String> {
    let Ok(v) = std::env::var("VFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("VFLOW_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("VFLOW_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate { scenario, out } => {
            let o = cmd_simulate(&scenario, out.as_deref())?;
            println!("wrote {} snapshots to {}", o.manifest.snapshots.len(), o.out_dir.display());
            if let Some(stop) = &o.manifest.stop {
                eprintln!("stopped at t = {} (step {}): {}", stop.time, stop.step, stop.message);
            }
            Ok(o.exit_code())
        }
        Command::Certify { manifest, tests, seed } => {
            let o = cmd_certify(&manifest, tests, seed)?;
            print!("{}", o.report.to_text());
            Ok(o.exit_code())
        }
        Command::Convergence { scenario, levels, out } => {
            let r = cmd_convergence(&scenario, levels, out.as_deref())?;
            print!("{}", r.to_csv());
            Ok(EXIT_OK)
        }
        Command::ProxTable { source, eps, phase, samples, max, out } => {
            let spec = resolve_potential(&source, phase)?;
            let table = cmd_prox_table(&spec.build()?, &eps, samples, max)?;
            match out {
                Some(p) => vflow::series::write_atomic(&p, table.as_bytes())?,
                None => print!("{table}"),
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_PARSE as u8);
    }
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
