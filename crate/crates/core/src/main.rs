use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use shockpinn::config::ExperimentConfig;
use shockpinn::experiment::{compare, run};
use shockpinn::loss::Parallelism;
use shockpinn::{plot, selftest, Error};

#[derive(Parser)]
#[command(name = "shockpinn", version, about = "PINN/XPINN inverse problems for the compressible Euler equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate data, train, analyze and write a run directory.
    Run {
        /// Preset name (smooth, expansion, oblique, bow) or config file.
        source: String,
        /// Dotted `key=value` override, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 1 runs sequentially.
        #[arg(long)]
        threads: Option<usize>,
        /// Run directory; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate errors and norms of finished runs.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
    },
    /// Gradient, entropy-pair and oracle self-tests.
    Check,
    /// PNG images of the field exports and loss history of a run.
    Plot { dir: PathBuf },
}

fn execute(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run {
            source,
            mut overrides,
            seed,
            threads,
            out,
        } => {
            if let Some(s) = seed {
                overrides.push(format!("seed={s}"));
            }
            let cfg = ExperimentConfig::resolve(&source, &overrides)?;
            let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            let parallelism = match threads {
                Some(1) => Parallelism::Sequential,
                _ => Parallelism::default(),
            };
            let report = with_threads(threads, || run(&cfg, &out, parallelism))??;
            info!("wrote {}", out.display());
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(true)
        }
        Command::Compare { dirs } => {
            print!("{}", compare(&dirs)?);
            Ok(true)
        }
        Command::Check => {
            let checks = selftest::run_all(shockpinn::physics::GAMMA)?;
            for c in &checks {
                println!("{c}");
            }
            Ok(checks.iter().all(|c| c.passed))
        }
        Command::Plot { dir } => {
            for p in plot::plot_run(&dir)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
    }
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Error> {
    match threads {
        Some(n) if n > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Some(0) => Err(Error::config("--threads must be positive")),
        _ => Ok(f()),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> T) -> Result<T, Error> {
    if threads == Some(0) {
        return Err(Error::config("--threads must be positive"));
    }
    Ok(f())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
