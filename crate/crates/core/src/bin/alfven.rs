use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use alfven_core::error::{Error, Result};
use alfven_core::io::config::parse_species;
use alfven_core::io::{parse_config, run_diagnose, run_dispersion, run_simulate, run_sweep, SimConfig, SweepAxis};

#[derive(Parser)]
#[command(name = "alfven", version, about = "Viscous Alfvén wave simulation and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write diagnostics, snapshots and a manifest.
    Simulate { config: PathBuf },
    /// Recompute diagnostics from snapshot files.
    Diagnose {
        config: PathBuf,
        snapshots: Vec<PathBuf>,
        #[arg(long, default_value = "diagnose.csv")]
        out: String,
    },
    /// Run one simulation per value of a parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Fit the complex frequency of a single linear mode.
    Dispersion {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
        k: Vec<i64>,
        #[arg(long, default_value = "plus")]
        species: String,
    },
}

fn load(path: &Path) -> Result<SimConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn configure_threads() {
    if let Some(n) = std::env::var("ALFVEN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config } => {
            let cfg = load(&config)?;
            let s = run_simulate(&cfg)?;
            println!(
                "{} records, {} snapshots, threshold_satisfied = {}, wall time {:.2} s",
                s.records.len(),
                s.snapshots.len(),
                s.threshold_satisfied,
                s.wall_time
            );
        }
        Command::Diagnose { config, snapshots, out } => {
            let cfg = load(&config)?;
            let r = run_diagnose(&cfg, &snapshots, &out)?;
            println!("{} records written to {}", r.len(), cfg.output_dir.join(out).display());
        }
        Command::Sweep { config, axis, values } => {
            let cfg = load(&config)?;
            let entries = run_sweep(&cfg, SweepAxis::parse(&axis)?, &values)?;
            for e in entries {
                match e.outcome {
                    Ok(s) => println!("{} = {}: final total_E {}", axis, e.value, s.final_total_e),
                    Err(m) => eprintln!("{} = {}: failed: {m}", axis, e.value),
                }
            }
        }
        Command::Dispersion { config, k, species } => {
            let cfg = load(&config)?;
            let k: [i64; 3] = k
                .try_into()
                .map_err(|_| Error::Validation("--k expects three integers kx,ky,kz".into()))?;
            let sp = parse_species(&species).map_err(Error::Validation)?;
            let r = run_dispersion(&cfg, k, sp)?;
            println!("omega_fit = {}, omega_expected = {}", r.omega_fit, r.omega_expected);
            println!("gamma_fit = {}, gamma_expected = {}", r.gamma_fit, r.gamma_expected);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    configure_threads();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
