use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stable_market::io;
use stable_market::{
    audit_trace, enumerate_stable_outcomes, generate, run, verify, GeneratorConfig, SolverError,
    VerifierError, DEFAULT_EPS,
};

const EXIT_OK: u8 = 0;
const EXIT_UNSTABLE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;
const EXIT_GUARD: u8 = 4;

#[derive(Parser)]
#[command(
    name = "stable-market",
    version,
    about = "Solve, verify, and audit pairwise-stable outcomes of discrete buyer-seller markets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and emit the outcome JSON.
    Solve {
        instance: PathBuf,
        /// Write the per-pass iteration trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the outcome here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an outcome for pairwise stability (exit 0 stable, 1 unstable).
    Verify {
        instance: PathBuf,
        outcome: PathBuf,
    },
    /// Replay a trace against the solver invariants (exit 0 clean, 1 violation).
    Audit {
        instance: PathBuf,
        trace: PathBuf,
    },
    /// Generate a seeded random instance.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        sellers: usize,
        #[arg(long, default_value_t = 3)]
        buyers: usize,
        /// Lower end of the price range bounds are drawn from.
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        lo: i64,
        /// Upper end of the price range bounds are drawn from.
        #[arg(long, default_value_t = 10, allow_negative_numbers = true)]
        hi: i64,
        /// Family weight for linear valuations.
        #[arg(long, default_value_t = 1)]
        linear: u32,
        /// Family weight for piecewise-linear valuations.
        #[arg(long, default_value_t = 1)]
        piecewise: u32,
        /// Family weight for exponential valuations.
        #[arg(long, default_value_t = 1)]
        exponential: u32,
        /// Full generator config as JSON; overrides the other flags.
        #[arg(long, conflicts_with_all = ["seed", "sellers", "buyers", "lo", "hi", "linear", "piecewise", "exponential"])]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate every stable outcome of a tiny instance (exit 4 if refused).
    Oracle {
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate an instance file (exit 0 valid, 1 violations).
    Check { instance: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let eps = match resolve_eps() {
        Ok(eps) => eps,
        Err(failure) => return fail(failure),
    };
    let result = match cli.command {
        Command::Solve { instance, trace, out } => cmd_solve(&instance, trace.as_deref(), out.as_deref(), eps),
        Command::Verify { instance, outcome } => cmd_verify(&instance, &outcome, eps),
        Command::Audit { instance, trace } => cmd_audit(&instance, &trace, eps),
        Command::Gen {
            seed,
            sellers,
            buyers,
            lo,
            hi,
            linear,
            piecewise,
            exponential,
            config,
            out,
        } => cmd_gen(
            seed,
            sellers,
            buyers,
            lo,
            hi,
            (linear, piecewise, exponential),
            config.as_deref(),
            out.as_deref(),
        ),
        Command::Oracle { instance, out } => cmd_oracle(&instance, out.as_deref(), eps),
        Command::Check { instance } => cmd_check(&instance),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => fail(failure),
    }
}

fn fail(failure: Failure) -> ExitCode {
    eprintln!("error: {}", failure.message);
    ExitCode::from(failure.code)
}

/// STABLE_MARKET_EPS overrides the float comparison tolerance.
fn resolve_eps() -> Result<f64, Failure> {
    match std::env::var("STABLE_MARKET_EPS") {
        Ok(raw) => {
            let eps: f64 = raw
                .parse()
                .map_err(|_| Failure::input(format!("invalid STABLE_MARKET_EPS \"{raw}\"")))?;
            if !eps.is_finite() || eps < 0.0 {
                return Err(Failure::input(format!(
                    "STABLE_MARKET_EPS must be a non-negative finite number, got {raw}"
                )));
            }
            Ok(eps)
        }
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_EPS),
        Err(e) => Err(Failure::input(format!("cannot read STABLE_MARKET_EPS: {e}"))),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<stable_market::MarketInstance, Failure> {
    let text = read_file(path)?;
    io::read_instance(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_solve(
    instance: &Path,
    trace: Option<&Path>,
    out: Option<&Path>,
    eps: f64,
) -> Result<u8, Failure> {
    let inst = load_instance(instance)?;
    let (outcome, full_trace) = run(&inst, eps).map_err(|e| match e {
        SolverError::Rejected(report) => Failure::input(format!("invalid instance: {report}")),
        other => Failure {
            code: EXIT_INTERNAL,
            message: other.to_string(),
        },
    })?;
    if let Some(path) = trace {
        let text = io::write_trace(&inst, &full_trace.states);
        fs::write(path, text)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    }
    emit(&io::write_outcome(&inst, &outcome), out)?;
    Ok(EXIT_OK)
}

fn cmd_verify(instance: &Path, outcome: &Path, eps: f64) -> Result<u8, Failure> {
    let inst = load_instance(instance)?;
    let text = read_file(outcome)?;
    let parsed = io::read_outcome(&text, &inst)
        .map_err(|e| Failure::input(format!("{}: {e}", outcome.display())))?;
    let report = verify(&inst, &parsed, eps).map_err(|e| match e {
        VerifierError::GuardRefused(msg) => Failure {
            code: EXIT_GUARD,
            message: msg,
        },
        other => Failure::input(other.to_string()),
    })?;
    emit(&io::write_stability_report(&inst, &report), None)?;
    Ok(if report.is_stable() { EXIT_OK } else { EXIT_UNSTABLE })
}

fn cmd_audit(instance: &Path, trace: &Path, eps: f64) -> Result<u8, Failure> {
    let inst = load_instance(instance)?;
    let text = read_file(trace)?;
    let states = io::read_trace(&text, &inst)
        .map_err(|e| Failure::input(format!("{}: {e}", trace.display())))?;
    let report = audit_trace(&inst, &states, eps);
    emit(&io::write_audit_report(&report), None)?;
    Ok(if report.is_clean() { EXIT_OK } else { EXIT_UNSTABLE })
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    seed: u64,
    sellers: usize,
    buyers: usize,
    lo: i64,
    hi: i64,
    weights: (u32, u32, u32),
    config: Option<&Path>,
    out: Option<&Path>,
) -> Result<u8, Failure> {
    let config = match config {
        Some(path) => {
            let text = read_file(path)?;
            io::read_generator_config(&text)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
        }
        None => {
            let mut cfg = GeneratorConfig::for_market(seed, sellers, buyers, lo, hi);
            cfg.weights = stable_market::FamilyWeights {
                linear: weights.0,
                piecewise_linear: weights.1,
                exponential: weights.2,
            };
            cfg
        }
    };
    let inst = generate(&config).map_err(|e| Failure::input(e.to_string()))?;
    emit(&io::write_instance(&inst), out)?;
    Ok(EXIT_OK)
}

fn cmd_oracle(instance: &Path, out: Option<&Path>, eps: f64) -> Result<u8, Failure> {
    let inst = load_instance(instance)?;
    let outcomes = enumerate_stable_outcomes(&inst, eps).map_err(|e| match e {
        VerifierError::GuardRefused(msg) => Failure {
            code: EXIT_GUARD,
            message: msg,
        },
        other => Failure::input(other.to_string()),
    })?;
    emit(&io::write_outcome_list(&inst, &outcomes), out)?;
    Ok(EXIT_OK)
}

fn cmd_check(instance: &Path) -> Result<u8, Failure> {
    let inst = load_instance(instance)?;
    let report = inst.validate();
    emit(&io::write_validation_report(&report), None)?;
    Ok(if report.is_clean() { EXIT_OK } else { EXIT_UNSTABLE })
}
