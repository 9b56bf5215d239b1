use clap::{Parser, Subcommand};
use phonon_lab::config::Scenario;
use phonon_lab::error::{LabError, Result};
use phonon_lab::record::run_to_dir;
use phonon_lab::reproduce::reproduce;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "phonon-lab",
    version,
    about = "Qubit-controlled SAW resonator modeling toolkit"
)]
struct Cli {
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "PHONON_LAB_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// RNG seed (overrides the config's `seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Regenerate a figure and compare against reference values.
    Reproduce {
        figure: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(LabError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut s = Scenario::from_path(&config)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let dir = out
                .or_else(|| s.out.clone())
                .unwrap_or_else(|| PathBuf::from("out").join(s.kind.name()));
            let (_, rec) = run_to_dir(&s, &dir)?;
            for a in &rec.artifacts {
                println!("wrote {}", dir.join(&a.name).display());
            }
            println!("content hash {}", rec.content_hash);
        }
        Command::Reproduce { figure, out } => {
            let dir = out.unwrap_or_else(|| PathBuf::from("out").join(&figure));
            let (cmp, _) = reproduce(&figure, &dir)?;
            print!("{}", cmp.table());
            println!("artifacts in {}", dir.display());
        }
        Command::Validate { config } => {
            let s = Scenario::from_path(&config)?;
            println!("{}: ok ({})", config.display(), s.kind.name());
        }
    }
    Ok(())
}
