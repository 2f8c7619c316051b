//! The `rl` experiment harness.
//!
//! [`run`] parses argv, merges an optional JSON config underneath the flags,
//! sizes the worker pool and dispatches to a subcommand. Exit codes: 0 on
//! success, 1 when a check or computation fails, 2 on usage or config errors.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use renewal_limits::{CaseKind, InterarrivalSpec, SlowlyVarying, SubordinatorSpec};

mod commands;
mod config;

pub use config::{ExperimentConfig, Method, OutputTarget, Side};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable consulted for the worker count when `--threads` is absent.
pub const THREADS_ENV: &str = "RL_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or parameters.
    Usage(String),
    /// A computation failed or a check did not pass.
    Failure(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn failure(msg: impl Into<String>) -> Self {
        Self::Failure(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (Self::Usage(m) | Self::Failure(m)) = self;
        // Diagnostics are always one line.
        f.write_str(&m.replace('\n', " "))
    }
}

impl std::error::Error for CliError {}

/// Accepts plain integers and integral scientific notation such as `1e5`.
fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x <= 2f64.powi(53) => Ok(x as usize),
        _ => Err(format!("`{s}` is not a non-negative integer")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "rl", version, about = "Monte Carlo and numerical checks of first-absolute-moment limits")]
struct Cli {
    /// Worker threads; defaults to $RL_THREADS, then to all available cores.
    /// Never changes numeric output.
    #[arg(long, global = true, value_parser = parse_count)]
    threads: Option<usize>,

    /// JSON file whose keys mirror the flag names; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fractional absolute moment E|W|^r of the limiting stable law.
    Moment(MomentArgs),
    /// Limit constant of a theorem case.
    Limit(LimitArgs),
    /// Solve x ell(c) / c^alpha = 1 for c.
    Scaling(ScalingArgs),
    /// Estimate E|N(s) - s/mu| or E|T(s) - s/m| at one level.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Scaled estimates along a grid of levels, as CSV.
    Converge(ConvergeArgs),
    /// Oracle, coupling, Wald and scaling checks at reduced sample sizes.
    Selfcheck(SelfcheckArgs),
}

#[derive(Debug, Subcommand)]
enum SimulateCommand {
    /// Renewal counting process.
    Renewal(RenewalArgs),
    /// Subordinator first-passage time.
    Passage(PassageArgs),
}

#[derive(Debug, Args)]
struct MomentArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    /// One or more of closed, quadrature, mc (comma separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    method: Option<Vec<Method>>,
    /// Monte Carlo sample size.
    #[arg(long, value_parser = parse_count)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Absolute tolerance of the quadrature.
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct LimitArgs {
    #[arg(long)]
    case: Option<CaseKind>,
    #[arg(long, visible_alias = "m", allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long, visible_alias = "b", allow_negative_numbers = true)]
    sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
}

#[derive(Debug, Args)]
struct ScalingArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// const:K | logpow:K,P | logshift:K,SHIFT
    #[arg(long)]
    ell: Option<SlowlyVarying>,
    #[arg(long, allow_negative_numbers = true)]
    x: Option<f64>,
    /// Relative residual tolerance.
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct RenewalArgs {
    /// exp:RATE | det:D | unif:A,B | pareto:ALPHA,XMIN | pareto2:XMIN
    #[arg(long)]
    dist: Option<InterarrivalSpec>,
    #[arg(long, allow_negative_numbers = true)]
    s: Option<f64>,
    #[arg(long, value_parser = parse_count)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Slowly varying function for the normalizer (heavy-tailed laws only).
    #[arg(long)]
    ell: Option<SlowlyVarying>,
    /// Write the result row as CSV (`-` for stdout).
    #[arg(long, value_name = "PATH")]
    csv: Option<OutputTarget>,
}

#[derive(Debug, Args)]
struct PassageArgs {
    /// cp:rate=R,jump=DIST | gamma:shape=A,rate=R,grid=H
    #[arg(long)]
    sub: Option<SubordinatorSpec>,
    #[arg(long, allow_negative_numbers = true)]
    s: Option<f64>,
    #[arg(long, value_parser = parse_count)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ell: Option<SlowlyVarying>,
    #[arg(long, value_name = "PATH")]
    csv: Option<OutputTarget>,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    #[arg(long, value_enum)]
    side: Option<Side>,
    #[arg(long)]
    case: Option<CaseKind>,
    #[arg(long)]
    dist: Option<InterarrivalSpec>,
    #[arg(long)]
    sub: Option<SubordinatorSpec>,
    #[arg(long)]
    ell: Option<SlowlyVarying>,
    /// Increasing levels, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    s_grid: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_count)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    csv: Option<OutputTarget>,
}

#[derive(Debug, Args)]
struct SelfcheckArgs {
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    /// The flags of this invocation as a config overlay.
    fn flags(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        match self {
            Command::Moment(a) => {
                (c.alpha, c.r, c.method, c.n, c.seed, c.tol) = (a.alpha, a.r, a.method.clone(), a.n, a.seed, a.tol);
            }
            Command::Limit(a) => (c.case, c.mu, c.sigma, c.alpha) = (a.case, a.mu, a.sigma, a.alpha),
            Command::Scaling(a) => (c.alpha, c.ell, c.x, c.tol) = (a.alpha, a.ell, a.x, a.tol),
            Command::Simulate(SimulateCommand::Renewal(a)) => {
                (c.dist, c.s, c.reps, c.seed, c.ell, c.csv) = (a.dist, a.s, a.reps, a.seed, a.ell, a.csv.clone());
            }
            Command::Simulate(SimulateCommand::Passage(a)) => {
                (c.sub, c.s, c.reps, c.seed, c.ell, c.csv) = (a.sub, a.s, a.reps, a.seed, a.ell, a.csv.clone());
            }
            Command::Converge(a) => {
                (c.side, c.case, c.dist, c.sub, c.ell) = (a.side, a.case, a.dist, a.sub, a.ell);
                (c.s_grid, c.reps, c.seed, c.csv) = (a.s_grid.clone(), a.reps, a.seed, a.csv.clone());
            }
            Command::Selfcheck(a) => c.seed = a.seed,
        }
        c
    }
}

fn thread_count(cfg: &ExperimentConfig) -> Result<usize, CliError> {
    let n = match cfg.threads {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => parse_count(v.trim()).map_err(|e| CliError::usage(format!("{THREADS_ENV}: {e}")))?,
            Err(std::env::VarError::NotPresent) => std::thread::available_parallelism().map_or(1, |n| n.get()),
            Err(e) => return Err(CliError::usage(format!("{THREADS_ENV}: {e}"))),
        },
    };
    if n == 0 {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    Ok(n)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let flags = {
        let mut f = cli.command.flags();
        f.threads = cli.threads;
        f
    };
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?.overlay(flags),
        None => flags,
    };
    let threads = thread_count(&cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::failure(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::Moment(_) => commands::moment(&cfg),
        Command::Limit(_) => commands::limit(&cfg),
        Command::Scaling(_) => commands::scaling(&cfg),
        Command::Simulate(SimulateCommand::Renewal(_)) => commands::simulate(&cfg, Side::Renewal),
        Command::Simulate(SimulateCommand::Passage(_)) => commands::simulate(&cfg, Side::Passage),
        Command::Converge(_) => commands::converge(&cfg),
        Command::Selfcheck(_) => commands::selfcheck(&cfg),
    })
}

/// Runs `rl` with the given argv (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    EXIT_OK
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    eprint!("{e}");
                    EXIT_USAGE
                }
                _ => {
                    let text = e.to_string();
                    let first = text.lines().next().unwrap_or("usage error");
                    eprintln!("rl: {}", first.trim_start_matches("error: "));
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("rl: {e}");
            e.exit_code()
        }
    }
}
