use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use signac_bench::{assert_scaling, prepare_corpora, run_benchmarks, BenchmarkConfig, BenchmarkReport, Tolerances};

#[derive(Parser)]
#[command(name = "bench", about = "Measure how metadata operations scale with data space size")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate corpora, time every category and write a JSON report.
    Run {
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[arg(long, default_value_t = 10)]
        keys: usize,
        #[arg(long, default_value_t = 100)]
        value_length: usize,
        /// Reuse corpora below this directory instead of a temporary one.
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Check a report against the expected complexity classes.
    Check {
        report: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        constant_tolerance: f64,
        #[arg(long, default_value_t = 3.0)]
        linear_tolerance: f64,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("bench: {message}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Run {
            sizes,
            seed,
            repetitions,
            keys,
            value_length,
            dir,
            output,
        } => {
            let config = BenchmarkConfig {
                sizes,
                keys_per_statepoint: keys,
                value_length,
                repetitions,
                seed,
            };
            let scratch;
            let base = match dir {
                Some(dir) => dir,
                None => {
                    scratch = tempfile::tempdir().map_err(|e| e.to_string())?;
                    scratch.path().to_path_buf()
                }
            };
            let generated = prepare_corpora(&base, &config).map_err(|e| e.to_string())?;
            if !generated.is_empty() {
                eprintln!("generated corpora {generated:?} in {}", base.display());
            }
            let report = run_benchmarks(&base, &config).map_err(|e| e.to_string())?;
            for m in &report.measurements {
                eprintln!(
                    "{:<24} N={:<6} min {:.3e} s  mean {:.3e} s",
                    m.category.to_string(),
                    m.n,
                    m.min,
                    m.mean
                );
            }
            let text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
            fs::write(&output, text + "\n").map_err(|e| format!("{}: {e}", output.display()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Check {
            report,
            constant_tolerance,
            linear_tolerance,
        } => {
            let text = fs::read_to_string(&report).map_err(|e| format!("{}: {e}", report.display()))?;
            let report: BenchmarkReport = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            let tolerances = Tolerances {
                constant: constant_tolerance,
                linear: linear_tolerance,
            };
            let verdict = assert_scaling(&report, tolerances).map_err(|e| e.to_string())?;
            for check in &verdict.checks {
                let mark = if check.passed { "ok  " } else { "FAIL" };
                println!("{mark} {}: {}", check.category, check.detail);
            }
            Ok(if verdict.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
