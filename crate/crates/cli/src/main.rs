use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use eitlab_cli::{CliError, Mode, Overrides};

/// Cavity EIT scenario runner.
#[derive(Debug, Parser)]
#[command(name = "eitlab", version)]
struct Args {
    /// spectrum, dynamics, scan-omega, scan-n, fit or reproduce
    mode: Mode,
    /// JSON scenario file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for sampled ensembles and synthetic noise (overrides seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Also render SVG plots
    #[arg(long)]
    svg: bool,
}

fn execute(args: &Args) -> Result<eitlab_cli::RunManifest, CliError> {
    let workers = eitlab_cli::workers_from_env()?;
    let overrides = Overrides { out_dir: args.out.clone(), seed: args.seed, svg: args.svg };
    let job = || eitlab_cli::run(args.mode, &args.config, &overrides, workers);
    #[cfg(feature = "parallel")]
    if let Some(n) = workers {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::schema(format!("EITLAB_WORKERS: {e}")))?;
        return pool.install(job);
    }
    job()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match execute(&args) {
        Ok(manifest) => {
            for check in &manifest.checks {
                println!("{}", check.line());
            }
            for note in &manifest.notes {
                println!("{note}");
            }
            println!("wrote {} files in {:.2} s", manifest.outputs.len() + 1, manifest.wall_clock_s);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("eitlab: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}
