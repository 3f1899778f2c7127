use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use potgame_core::harness::{run_experiment, verify_suite, ExperimentConfig, GameName, RunOverrides, VerifyOptions};
use potgame_core::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "potgame", version, about = "Stochastic gradient solvers for potential games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Number of paths run concurrently.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory; overrides the config's `output`.
        #[arg(long, env = "POTGAME_OUT_DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Run the property checks and report measured values against their bounds.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// List the benchmark games.
    ListGames,
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(if err.is_validation() { EXIT_VALIDATION } else { EXIT_RUNTIME })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            paths,
            jobs,
            out_dir,
        } => {
            if jobs == Some(0) {
                eprintln!("error: --jobs must be positive");
                return ExitCode::from(EXIT_VALIDATION);
            }
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let overrides = RunOverrides {
                seed,
                paths,
                jobs,
                out_dir,
            };
            let out = match run_experiment(&cfg, &overrides) {
                Ok(o) => o,
                Err(e) => return fail(&e),
            };
            if let Err(e) = out.write(&out.config.output) {
                return fail(&e);
            }
            for f in &out.failed {
                eprintln!("warning: path {} at eta {} failed: {}", f.path, f.eta, f.error);
            }
            print!("{}", out.table_csv);
            eprintln!("wrote {}", out.config.output.display());
            ExitCode::SUCCESS
        }
        Command::Verify { seed } => {
            let report = verify_suite(&VerifyOptions {
                seed,
                ..VerifyOptions::default()
            });
            print!("{}", report.render());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFY)
            }
        }
        Command::ListGames => {
            for g in GameName::ALL {
                println!("{:<16} {}", g.as_str(), g.description());
            }
            ExitCode::SUCCESS
        }
    }
}
