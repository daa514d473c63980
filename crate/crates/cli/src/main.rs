//! Command-line surface: fidelity queries, the closed-form comparison table,
//! the full verification report, and trajectory simulation of the cloning
//! network.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error.

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use mclone_core::comb::{WIRE_A, WIRE_B};
use mclone_core::measurement::haar_sample;
use mclone_core::operator::{Operator, Signature};
use mclone_core::optimize::{
    cloning_extremal_search, cloning_fidelity_closed_form, estimate_prepare_fidelity,
    learning_fidelity_closed_form, optimal_learning_blocks,
};
use mclone_core::realization::{born_probabilities, realization_instrument, simulate_run};
use mclone_core::rng::stream_rng;
use mclone_core::verify::{run_verification, VerifyConfig};

/// Environment variable read for the default seed when `--seed` is absent.
const SEED_ENV: &str = "MCLONE_SEED";

#[derive(Parser)]
#[command(
    name = "mclone",
    about = "Optimal replication of an unknown von Neumann measurement: \
             fidelity queries, verification, and network simulation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Clone,
    Learn,
    Estimate,
}

#[derive(Clone, Copy, ValueEnum)]
enum TextFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitarySource {
    Identity,
    Haar,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form and independently optimized fidelity for one task.
    Fidelity {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        dim: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: TextFormat,
    },
    /// Fidelity-vs-dimension table for all three strategies.
    Table {
        #[arg(long, default_value_t = 10)]
        dmax: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: TableFormat,
    },
    /// Run the verification suite; prints one JSON entry per check.
    Verify {
        /// Comma-separated dimensions, each in 2..=8.
        #[arg(long, default_value = "2,3")]
        dims: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10_000)]
        mc_samples: usize,
        /// Random feasible points for the sampled-optimality check at d = 2.
        #[arg(long, default_value_t = 100_000)]
        optimality_samples: usize,
    },
    /// Trajectory simulation of the cloning network on the maximally mixed
    /// input; prints an outcome histogram with a Born-rule reference column.
    Simulate {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "identity")]
        unitary: UnitarySource,
    },
}

/// Format with 12 significant digits, locale independent.
fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000000".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (11 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Parse back the printed representation so JSON and text emissions agree to
/// the full printed precision.
fn rounded(x: f64) -> f64 {
    sig12(x).parse().expect("formatted float")
}

fn seed_or_env(seed: Option<u64>) -> u64 {
    seed.or_else(|| {
        std::env::var(SEED_ENV)
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or(0)
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Fidelity { task, dim, format } => cmd_fidelity(task, dim, format),
        Command::Table { dmax, format } => cmd_table(dmax, format),
        Command::Verify {
            dims,
            tol,
            seed,
            mc_samples,
            optimality_samples,
        } => cmd_verify(&dims, tol, seed, mc_samples, optimality_samples),
        Command::Simulate {
            dim,
            shots,
            seed,
            unitary,
        } => cmd_simulate(dim, shots, seed, unitary),
    }
}

fn cmd_fidelity(task: Task, dim: usize, format: TextFormat) -> ExitCode {
    if dim < 2 {
        return usage_error("--dim must be at least 2");
    }
    let (name, closed, optimized) = match task {
        Task::Clone => {
            let closed = cloning_fidelity_closed_form(dim);
            let result = match cloning_extremal_search(dim) {
                Ok(r) => r,
                Err(e) => return usage_error(&e.to_string()),
            };
            ("clone", closed, result.certificate.best_value)
        }
        Task::Learn => {
            let closed = learning_fidelity_closed_form(dim);
            let result = match optimal_learning_blocks(dim) {
                Ok(r) => r,
                Err(e) => return usage_error(&e.to_string()),
            };
            ("learn", closed, result.certificate.best_value)
        }
        Task::Estimate => {
            let closed = match estimate_prepare_fidelity(dim) {
                Ok(v) => v,
                Err(e) => return usage_error(&e.to_string()),
            };
            ("estimate", closed, closed)
        }
    };
    match format {
        TextFormat::Text => {
            println!("task: {name}");
            println!("dim: {dim}");
            println!("closed_form: {}", sig12(closed));
            println!("optimized: {}", sig12(optimized));
        }
        TextFormat::Json => {
            let obj = serde_json::json!({
                "task": name,
                "dim": dim,
                "closed_form": rounded(closed),
                "optimized": rounded(optimized),
            });
            println!("{obj}");
        }
    }
    ExitCode::SUCCESS
}

fn cmd_table(dmax: usize, format: TableFormat) -> ExitCode {
    if dmax < 2 {
        return usage_error("--dmax must be at least 2");
    }
    match format {
        TableFormat::Csv => {
            println!("d,f_clone,f_learn,f_estimate");
            for d in 2..=dmax {
                println!(
                    "{d},{},{},{}",
                    sig12(cloning_fidelity_closed_form(d)),
                    sig12(learning_fidelity_closed_form(d)),
                    sig12(estimate_prepare_fidelity(d).expect("d >= 2"))
                );
            }
        }
        TableFormat::Json => {
            let rows: Vec<_> = (2..=dmax)
                .map(|d| {
                    serde_json::json!({
                        "d": d,
                        "f_clone": rounded(cloning_fidelity_closed_form(d)),
                        "f_learn": rounded(learning_fidelity_closed_form(d)),
                        "f_estimate": rounded(estimate_prepare_fidelity(d).expect("d >= 2")),
                    })
                })
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&rows).expect("table serializes")
            );
        }
    }
    ExitCode::SUCCESS
}

fn cmd_verify(
    dims: &str,
    tol: f64,
    seed: Option<u64>,
    mc_samples: usize,
    optimality_samples: usize,
) -> ExitCode {
    let parsed: Result<Vec<usize>, _> = dims
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect();
    let dims = match parsed {
        Ok(dims) if !dims.is_empty() && dims.iter().all(|d| (2..=8).contains(d)) => dims,
        _ => return usage_error("--dims must be a comma-separated list of integers in 2..=8"),
    };
    let cfg = VerifyConfig {
        dims,
        tol,
        seed: seed_or_env(seed),
        mc_samples,
        optimality_samples,
        ..Default::default()
    };
    let report = match run_verification(&cfg) {
        Ok(r) => r,
        Err(e) => return usage_error(&e.to_string()),
    };
    println!("{}", report.to_json_lines());
    let (pass, warn, fail) = report.counts();
    eprintln!("verification: {pass} pass, {warn} warn, {fail} fail");
    if report.has_fail() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_simulate(dim: usize, shots: u64, seed: Option<u64>, unitary: UnitarySource) -> ExitCode {
    if dim < 2 {
        return usage_error("--dim must be at least 2");
    }
    if shots == 0 {
        return usage_error("--shots must be at least 1");
    }
    let seed = seed_or_env(seed);
    let u = match unitary {
        UnitarySource::Identity => DMatrix::<C64>::identity(dim, dim),
        UnitarySource::Haar => {
            let mut rng = stream_rng(seed, u64::MAX);
            haar_sample(dim, &mut rng)
        }
    };
    let rho = Operator::identity(
        Signature::new(&[(WIRE_A, dim), (WIRE_B, dim)]).expect("distinct labels"),
    )
    .scale_re(1.0 / (dim * dim) as f64);
    let network = match realization_instrument(dim) {
        Ok(n) => n,
        Err(e) => return usage_error(&e.to_string()),
    };
    let hist = match simulate_run(dim, &u, &rho, shots, seed) {
        Ok(h) => h,
        Err(e) => return usage_error(&e.to_string()),
    };
    let born = match born_probabilities(&network, &u, &rho) {
        Ok(b) => b,
        Err(e) => return usage_error(&e.to_string()),
    };
    println!("i,j,count,frequency,born");
    for (&(i, j), &count) in hist.counts() {
        println!(
            "{i},{j},{count},{},{}",
            sig12(count as f64 / shots as f64),
            sig12(*born.get(&(i, j)).unwrap_or(&0.0))
        );
    }
    ExitCode::SUCCESS
}
