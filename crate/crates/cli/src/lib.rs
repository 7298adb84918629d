//! Command-line front end: verification suites, seeded training runs,
//! orthogonalization traces and norm tables.

// `!(x > 0.0)` is how validation rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod io;
pub mod table;
pub mod trace;
pub mod train;
pub mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use normdescent::Normalization;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::verify::Suite;

pub const THREADS_ENV: &str = "NORMDESCENT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "normdescent", version, about = "Steepest descent under chosen norms: checks, runs and tables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run property checks and print a JSON report. Exits 1 if any fail.
    Verify {
        #[arg(value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train from a JSON config (one experiment or a list).
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override every experiment's dataset seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output base path; lists get `-<index>` suffixes.
        #[arg(long)]
        output: Option<String>,
    },
    /// Per-iteration error of Newton-Schulz against the SVD polar factor.
    OrthogonalizeTrace {
        /// CSV file, one matrix row per line, no header.
        matrix: PathBuf,
        /// Odd-power coefficients, lowest degree first.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        coefficients: Option<Vec<f64>>,
        #[arg(long, default_value_t = 30)]
        iterations: usize,
        #[arg(long, value_enum, default_value_t = NormalizationArg::Spectral)]
        normalization: NormalizationArg,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Every implemented norm and dual of a matrix, with steepest-descent updates.
    NormTable {
        matrix: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    Spectral,
    Frobenius,
}

impl From<NormalizationArg> for Normalization {
    fn from(n: NormalizationArg) -> Self {
        match n {
            NormalizationArg::Spectral => Normalization::Spectral,
            NormalizationArg::Frobenius => Normalization::Frobenius,
        }
    }
}

/// Caps rayon's global pool when `NORMDESCENT_THREADS` is set.
pub fn init_thread_pool() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("{THREADS_ENV}: expected a positive integer, got {raw:?}")))?;
    // A second initialization (e.g. in tests) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn emit(output: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match output {
        Some(path) => io::write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    init_thread_pool()?;
    match cli.command {
        Command::Verify { suite, seed, output } => {
            let report = verify::run_suite(suite, seed);
            for c in &report.checks {
                let mark = if c.passed { "ok  " } else { "FAIL" };
                eprintln!(
                    "{mark} {}/{} error {:.3e} (tol {:.1e})",
                    c.suite, c.name, c.measured_error, c.tolerance
                );
                if let Some(f) = &c.failure {
                    eprintln!("     {f}");
                }
            }
            let mut json = serde_json::to_string_pretty(&report).expect("reports serialize");
            json.push('\n');
            emit(output.as_ref(), &json)?;
            if report.failed > 0 {
                return Err(CliError::ChecksFailed(report.failed));
            }
            Ok(())
        }
        Command::Train { config, seed, output } => {
            let mut configs = config::load_configs(&config)?;
            let many = configs.len() > 1;
            for (i, cfg) in configs.iter_mut().enumerate() {
                if let Some(s) = seed {
                    cfg.dataset.seed = s;
                }
                if let Some(out) = &output {
                    cfg.output_path = if many { format!("{out}-{i}") } else { out.clone() };
                }
            }
            let results: Vec<CliResult<train::RunRecord>> =
                configs.par_iter().map(train::run_experiment).collect();
            let mut worst: Option<CliError> = None;
            for res in results {
                let err = match res {
                    Ok(record) => {
                        let last = record.rows.last();
                        eprintln!(
                            "{}: {} steps, final loss {}",
                            record.config.output_path,
                            record.rows.len(),
                            last.map_or("n/a".into(), |r| io::fmt_float(r.loss))
                        );
                        train::record_error(&record)
                    }
                    Err(e) => Some(e),
                };
                if let Some(e) = err {
                    eprintln!("error: {e}");
                    // Usage problems outrank numerical aborts.
                    let replace = match &worst {
                        None => true,
                        Some(w) => e.exit_code() == error::EXIT_USAGE && w.exit_code() != error::EXIT_USAGE,
                    };
                    if replace {
                        worst = Some(e);
                    }
                }
            }
            worst.map_or(Ok(()), Err)
        }
        Command::OrthogonalizeTrace {
            matrix,
            coefficients,
            iterations,
            normalization,
            output,
        } => {
            let g = io::read_matrix_csv(&matrix)?;
            let spec = trace::build_spec(coefficients, iterations, normalization.into())?;
            let rows = trace::trace(&g, &spec)?;
            emit(output.as_ref(), &trace::csv_text(&rows))
        }
        Command::NormTable { matrix, json, output } => {
            let m = io::read_matrix_csv(&matrix)?;
            let t = table::norm_table(&m)?;
            let text = if json {
                let mut s = serde_json::to_string_pretty(&t).expect("tables serialize");
                s.push('\n');
                s
            } else {
                table::render_text(&t)
            };
            emit(output.as_ref(), &text)
        }
    }
}
