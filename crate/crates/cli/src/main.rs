use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cmg::artifacts::{read_manifest, read_summary, verify_checksums, SUMMARY};
use cmg::config::RunConfig;
use cmg::runner::{run, CellSummary};
use cmg::verify::{verify, Level};
use cmg::{CliError, Result};
use cmg_core::oracle::OracleSettings;

#[derive(Parser)]
#[command(name = "cmg", version, about = "Lagrangian game dynamics for constrained Markov games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (threshold, seed) cell of a config and write artifacts.
    Run {
        config: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the property suites and print a JSON report.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: Level,
        #[arg(long, hide = true)]
        oracle_tol: Option<f64>,
    },
    /// Print the summary of a sweep directory or a single cell.
    Inspect { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run {
            config,
            seed,
            out,
            threads,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let summary = run(&cfg, &cfg.output_dir, threads)?;
            for c in &summary.cells {
                print_cell(c);
            }
            println!("summary: {}", cfg.output_dir.join(SUMMARY).display());
            Ok(0)
        }
        Command::Verify { level, oracle_tol } => {
            let mut settings = OracleSettings::default();
            if let Some(t) = oracle_tol {
                settings.tol = t;
            }
            let report = verify(level, &settings)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(u8::from(report.failures > 0))
        }
        Command::Inspect { dir } => {
            if dir.join(SUMMARY).exists() {
                let summary = read_summary(&dir)?;
                for c in &summary.cells {
                    print_cell(c);
                }
                println!("all feasible: {}", summary.all_feasible);
            } else {
                let manifest = read_manifest(&dir)?;
                print_cell(&manifest.summary);
                let bad = verify_checksums(&dir)?;
                if !bad.is_empty() {
                    return Err(CliError::io(
                        &dir,
                        std::io::Error::new(
                            std::io::ErrorKind::InvalidData,
                            format!("checksum mismatch: {}", bad.join(", ")),
                        ),
                    ));
                }
                println!("checksums: ok");
            }
            Ok(0)
        }
    }
}

fn print_cell(c: &CellSummary) {
    println!(
        "{:<20} start {:>4}  window cost {:?}  feasible {:?}  window reward {:?}  max |lambda|_1 {:.4}  slackness {:.4} <= {:.4}",
        c.name,
        c.start_state,
        c.window_cost,
        c.feasible,
        c.window_reward,
        c.max_lambda_norm,
        c.slackness,
        c.slackness_bound
    );
}
